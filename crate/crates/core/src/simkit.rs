//! Closed-loop simulation of the coupled plant under the whole-body
//! controller and an impedance-driven operator, plus the metrics used to
//! compare force augmentation factors.

use std::sync::Mutex;

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};

use crate::coupling::{CoupledSystem, OperatorModel};
use crate::cwbc::{ComTaskMode, Controller, FeedbackMode, Gains, TorqueCommand};
use crate::error::{Error, Result};
use crate::passivity::{monitor_tolerance, storage_total, EnergyBreakdown, PassivityMonitor, PassivityReport};
use crate::rigidbody::{JointState, Link, PlanarChain, STANDARD_GRAVITY};

/// Cartesian impedance the operator applies at the coupling point:
/// `f_op = K (x_d - x) - D xdot`.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorPolicy {
    pub stiffness: Matrix2<f64>,
    pub damping: Matrix2<f64>,
    pub target: Vector2<f64>,
}

impl OperatorPolicy {
    pub fn validate(&self) -> Result<()> {
        for (name, k) in [("k_po", &self.stiffness), ("k_do", &self.damping)] {
            let symmetric = (k - k.transpose()).amax() <= 1e-12 * k.amax().max(1.0);
            if !symmetric || k.cholesky().is_none() {
                return Err(Error::invalid(name, "must be symmetric positive-definite"));
            }
        }
        Ok(())
    }

    pub fn force(&self, x: &Vector2<f64>, xd: &Vector2<f64>) -> Vector2<f64> {
        self.stiffness * (self.target - x) - self.damping * xd
    }

    /// `tau_o = J_o^T f_op`.
    pub fn operator_torque(&self, op_jacobian: &DMatrix<f64>, f_op: &Vector2<f64>) -> DVector<f64> {
        op_jacobian.transpose() * DVector::from_vec(vec![f_op.x, f_op.y])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Integrator {
    /// `qd+ = qd + dt qdd; q+ = q + dt qd+`.
    #[default]
    SemiImplicitEuler,
    /// Classical RK4 on the plant with all torques held over the step.
    Rk4Zoh,
}

/// What the controller sees of the interaction force.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SensorModel {
    /// Force rebuilt from the previous acceleration sample.
    #[default]
    PreviousSample,
    /// Force consistent with the acceleration it produces; the algebraic loop
    /// is solved exactly.
    Instantaneous,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOptions {
    pub integrator: Integrator,
    pub sensor: SensorModel,
    pub plant_coriolis: bool,
    pub max_joint_speed: f64,
}

impl Default for StepOptions {
    fn default() -> Self {
        Self {
            integrator: Integrator::SemiImplicitEuler,
            sensor: SensorModel::PreviousSample,
            plant_coriolis: false,
            max_joint_speed: DEFAULT_MAX_JOINT_SPEED,
        }
    }
}

/// Joint speed [rad/s] above which a run is declared divergent.
pub const DEFAULT_MAX_JOINT_SPEED: f64 = 50.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub chain: PlanarChain,
    pub operator_mass: f64,
    pub gains: Gains,
    pub policy: OperatorPolicy,
    /// `x_c^d`; only the x component is used in horizontal mode.
    pub com_target: Vector2<f64>,
    pub q0: DVector<f64>,
    pub duration: f64,
    pub dt: f64,
    pub integrator: Integrator,
    pub sensor: SensorModel,
    pub plant_coriolis: bool,
    pub feedback: FeedbackMode,
    pub max_joint_speed: f64,
    pub k_ff_sweep: Vec<f64>,
}

/// Initial pose of the default experiment: leaning forward with a slight
/// arc, link angles 56, 54, 52, 50 and 48 degrees.
pub const DEFAULT_Q0: [f64; 5] = [0.9773843811168246, -0.03490658503988659, -0.03490658503988659, -0.03490658503988659, -0.03490658503988659];

/// Operator target relative to the initial end-effector position [m]:
/// 0.1 m, down and slightly back.
pub const DEFAULT_EE_OFFSET: [f64; 2] = [-0.026, -0.097];

/// Balance target relative to the initial horizontal CoM [m].
pub const DEFAULT_COM_OFFSET: f64 = -0.05;

/// Operator mass carried at the cuff [kg].
pub const DEFAULT_OPERATOR_MASS: f64 = 3.0;

/// Four 4 kg rods and a heavy distal segment (actuator and cuff) whose mass
/// sits toward the tip.
pub fn default_chain() -> PlanarChain {
    let mut links = vec![Link::rod(0.3, 4.0); 5];
    links[4] = Link {
        length: 0.3,
        mass: 12.0,
        com_offset: 0.22,
        inertia: 12.0 * 0.3 * 0.3 / 12.0,
    };
    PlanarChain::new(links, STANDARD_GRAVITY).expect("default chain is valid")
}

pub const DEFAULT_SWEEP: [f64; 7] = [0.0, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0];

impl Default for Scenario {
    fn default() -> Self {
        Self::around_pose(default_chain(), DEFAULT_OPERATOR_MASS, DVector::from_row_slice(&DEFAULT_Q0))
            .expect("default pose matches chain")
    }
}

impl Scenario {
    /// Default gains and timing with targets placed relative to `q0`: the
    /// end-effector target at [`DEFAULT_EE_OFFSET`] and the CoM target at
    /// [`DEFAULT_COM_OFFSET`] from the initial pose.
    pub fn around_pose(chain: PlanarChain, operator_mass: f64, q0: DVector<f64>) -> Result<Self> {
        let sys = CoupledSystem::new(chain.clone(), OperatorModel::PointMass { mass: operator_mass });
        let ee0 = chain.end_effector(&q0)?;
        let com0 = sys.coupled_com(&q0)?;
        Ok(Self {
            chain,
            operator_mass,
            gains: Gains::default(),
            policy: OperatorPolicy {
                stiffness: Matrix2::identity() * 400.0,
                damping: Matrix2::identity() * 40.0,
                target: ee0 + Vector2::from(DEFAULT_EE_OFFSET),
            },
            com_target: Vector2::new(com0.x + DEFAULT_COM_OFFSET, com0.y),
            q0,
            duration: 10.0,
            dt: 1e-3,
            integrator: Integrator::SemiImplicitEuler,
            sensor: SensorModel::PreviousSample,
            plant_coriolis: false,
            feedback: FeedbackMode::Simplified,
            max_joint_speed: DEFAULT_MAX_JOINT_SPEED,
            k_ff_sweep: DEFAULT_SWEEP.to_vec(),
        })
    }

    pub fn system(&self) -> CoupledSystem {
        CoupledSystem::new(
            self.chain.clone(),
            OperatorModel::PointMass {
                mass: self.operator_mass,
            },
        )
    }

    pub fn with_k_ff(&self, k_ff: f64) -> Self {
        let mut s = self.clone();
        s.gains.k_ff = k_ff;
        s
    }

    pub fn steps(&self) -> usize {
        (self.duration / self.dt + 1e-9).floor() as usize
    }

    pub fn step_options(&self) -> StepOptions {
        StepOptions {
            integrator: self.integrator,
            sensor: self.sensor,
            plant_coriolis: self.plant_coriolis,
            max_joint_speed: self.max_joint_speed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::invalid("dt", "must be > 0"));
        }
        if !(self.duration >= 0.0 && self.duration.is_finite()) {
            return Err(Error::invalid("duration", "must be >= 0"));
        }
        if !(self.operator_mass > 0.0 && self.operator_mass.is_finite()) {
            return Err(Error::invalid("mass", "operator mass must be > 0"));
        }
        if !(self.max_joint_speed > 0.0) {
            return Err(Error::invalid("max_joint_speed", "must be > 0"));
        }
        if self.q0.len() != self.chain.dof() || self.q0.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(
                "q0",
                format!("needs {} finite joint angles", self.chain.dof()),
            ));
        }
        if self.k_ff_sweep.iter().any(|k| !(*k >= 0.0 && k.is_finite())) {
            return Err(Error::invalid("k_ff", "sweep factors must be >= 0"));
        }
        self.gains.validate()?;
        self.policy.validate()
    }
}

/// Everything the simulator records for one sample instant.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub t: f64,
    pub q: DVector<f64>,
    pub qd: DVector<f64>,
    /// Joint acceleration produced by the plant at this instant.
    pub qdd: DVector<f64>,
    pub x_ee: Vector2<f64>,
    pub xd_ee: Vector2<f64>,
    pub x_c: Vector2<f64>,
    /// Interaction force consistent with `qdd` (what the sensor will read).
    pub f_ox: Vector2<f64>,
    /// Interaction force the controller used (built from the previous
    /// acceleration sample).
    pub f_sensed: Vector2<f64>,
    /// Operator Cartesian force.
    pub f_op: Vector2<f64>,
    pub tau_o: DVector<f64>,
    pub torque: TorqueCommand,
    /// `|f_op|^2` [N^2].
    pub effort: f64,
    pub energy: EnergyBreakdown,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Divergence {
    pub time: f64,
    pub speed: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimLog {
    pub dof: usize,
    pub dt: f64,
    pub k_ff: f64,
    pub ee_target: Vector2<f64>,
    pub com_target: Vector2<f64>,
    pub com_mode: ComTaskMode,
    pub rows: Vec<LogRow>,
    pub passivity: PassivityReport,
    /// Set when the run stopped early; `rows` then ends at the last sane state.
    pub divergence: Option<Divergence>,
}

/// Plant forward dynamics
/// `M_xo qdd = tau_x + J_x^T J_o#^T tau_o - h_x - J_x^T J_o#^T h_o [- C]`.
pub fn plant_acceleration(
    sys: &CoupledSystem,
    q: &DVector<f64>,
    qd: &DVector<f64>,
    tau_x: &DVector<f64>,
    tau_o: &DVector<f64>,
    coriolis: bool,
) -> Result<DVector<f64>> {
    let terms = sys.terms(q)?;
    let mass = sys.coupled_mass_matrix(q)?;
    let mut rhs = tau_x + terms.reflect() * tau_o - sys.coupled_gravity(q)?;
    if coriolis {
        rhs -= sys.coupled_coriolis(q, qd)?;
    }
    let chol = mass.cholesky().ok_or(Error::SingularTask { sigma_min: 0.0 })?;
    Ok(chol.solve(&rhs))
}

fn integrate(
    sys: &CoupledSystem,
    state: &JointState,
    qdd: &DVector<f64>,
    tau_x: &DVector<f64>,
    tau_o: &DVector<f64>,
    dt: f64,
    opts: &StepOptions,
) -> Result<JointState> {
    match opts.integrator {
        Integrator::SemiImplicitEuler => {
            let qd = &state.qd + dt * qdd;
            let q = &state.q + dt * &qd;
            Ok(JointState { q, qd })
        }
        Integrator::Rk4Zoh => {
            let f = |q: &DVector<f64>, qd: &DVector<f64>| {
                plant_acceleration(sys, q, qd, tau_x, tau_o, opts.plant_coriolis)
            };
            rk4(&state.q, &state.qd, qdd.clone(), dt, f)
        }
    }
}

fn rk4<F>(q: &DVector<f64>, qd: &DVector<f64>, a1: DVector<f64>, dt: f64, f: F) -> Result<JointState>
where
    F: Fn(&DVector<f64>, &DVector<f64>) -> Result<DVector<f64>>,
{
    let h = 0.5 * dt;
    let v1 = qd.clone();
    let q2 = q + h * &v1;
    let v2 = qd + h * &a1;
    let a2 = f(&q2, &v2)?;
    let q3 = q + h * &v2;
    let v3 = qd + h * &a2;
    let a3 = f(&q3, &v3)?;
    let q4 = q + dt * &v3;
    let v4 = qd + dt * &a3;
    let a4 = f(&q4, &v4)?;
    Ok(JointState {
        q: q + dt / 6.0 * (&v1 + 2.0 * &v2 + 2.0 * &v3 + &v4),
        qd: qd + dt / 6.0 * (&a1 + 2.0 * &a2 + 2.0 * &a3 + &a4),
    })
}

/// One control period.
///
/// Evaluation order: operator action, sensed interaction force, controller
/// torque, plant acceleration, integration, log. The sensed force is built
/// from the previous acceleration sample (zero on the first step); the logged
/// `f_ox` is the force consistent with the acceleration of this step.
pub fn step(
    sys: &CoupledSystem,
    controller: &mut Controller,
    policy: &OperatorPolicy,
    state: &JointState,
    t: f64,
    dt: f64,
    opts: &StepOptions,
) -> Result<(JointState, LogRow)> {
    let row = evaluate(sys, controller, policy, state, t, opts)?;
    let next = integrate(sys, state, &row.qdd, &row.torque.tau, &row.tau_o, dt, opts)?;
    controller.record_acceleration(&row.qdd);
    let speed = next.qd.norm();
    if !(speed <= opts.max_joint_speed) || next.q.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalBlowup { time: t + dt, speed });
    }
    Ok((next, row))
}

fn evaluate(
    sys: &CoupledSystem,
    controller: &Controller,
    policy: &OperatorPolicy,
    state: &JointState,
    t: f64,
    opts: &StepOptions,
) -> Result<LogRow> {
    let n = sys.dof();
    let (q, qd) = (&state.q, &state.qd);
    let terms = sys.terms(q)?;

    let x_ee = sys.chain.end_effector(q)?;
    let v = &terms.ee_jacobian * qd;
    let xd_ee = Vector2::new(v[0], v[1]);
    let f_op = policy.force(&x_ee, &xd_ee);
    let tau_o = policy.operator_torque(&terms.op_jacobian, &f_op);

    let zero = DVector::zeros(n);
    let (f_sensed, torque, qdd) = match opts.sensor {
        SensorModel::PreviousSample => {
            let last = controller.last_acceleration().unwrap_or(&zero);
            let f_sensed = sys.interaction_force_with(&terms, qd, last, &tau_o)?;
            let torque = controller.command(sys, q, qd, &f_sensed)?;
            let qdd = plant_acceleration(sys, q, qd, &torque.tau, &tau_o, opts.plant_coriolis)?;
            (f_sensed, torque, qdd)
        }
        SensorModel::Instantaneous => {
            // torque is affine in the sensed force, force is affine in qdd
            let base = controller.command(sys, q, qd, &Vector2::zeros())?;
            let mut gain = DMatrix::zeros(n, 2);
            for (i, e) in [Vector2::x(), Vector2::y()].iter().enumerate() {
                let c = controller.command(sys, q, qd, e)?;
                gain.set_column(i, &(c.tau - &base.tau));
            }
            let free = sys.interaction_force_with(&terms, qd, &zero, &tau_o)?;
            let free = DVector::from_vec(vec![free.x, free.y]);
            let inertial = terms.op_pinv.transpose() * &terms.op_inertia * terms.transmit();
            let mass = sys.coupled_mass_matrix(q)? + &gain * &inertial;
            let mut rhs = &base.tau + &gain * &free + terms.reflect() * &tau_o - sys.coupled_gravity(q)?;
            if opts.plant_coriolis {
                rhs -= sys.coupled_coriolis(q, qd)?;
            }
            let qdd = mass.lu().solve(&rhs).ok_or(Error::SingularTask { sigma_min: 0.0 })?;
            let f = free - inertial * &qdd;
            let f_sensed = Vector2::new(f[0], f[1]);
            let torque = controller.command(sys, q, qd, &f_sensed)?;
            (f_sensed, torque, qdd)
        }
    };
    let f_ox = sys.interaction_force_with(&terms, qd, &qdd, &tau_o)?;

    let energy = storage_total(sys, q, qd, &controller.com_target, &controller.gains, policy)?;
    Ok(LogRow {
        t,
        q: q.clone(),
        qd: qd.clone(),
        qdd,
        x_ee,
        xd_ee,
        x_c: sys.coupled_com(q)?,
        f_ox,
        f_sensed,
        f_op,
        tau_o,
        torque,
        effort: f_op.norm_squared(),
        energy,
    })
}

/// Simulate a scenario. Divergence is reported in the log rather than as an
/// error so partial results survive; see [`run`] for the strict variant.
pub fn simulate(scenario: &Scenario) -> Result<SimLog> {
    scenario.validate()?;
    let sys = scenario.system();
    let mut controller = Controller::new(scenario.gains.clone(), scenario.com_target, scenario.feedback)?;
    let opts = scenario.step_options();
    let steps = scenario.steps();

    let mut state = JointState::at_rest(scenario.q0.clone());
    let mut rows = Vec::with_capacity(steps + 1);
    let mut monitor: Option<PassivityMonitor> = None;
    let mut divergence = None;

    for k in 0..=steps {
        let t = k as f64 * scenario.dt;
        let row = if k < steps {
            match step(&sys, &mut controller, &scenario.policy, &state, t, scenario.dt, &opts) {
                Ok((next, row)) => {
                    state = next;
                    row
                }
                Err(Error::NumericalBlowup { time, speed }) => {
                    divergence = Some(Divergence { time, speed });
                    break;
                }
                Err(e) => return Err(e),
            }
        } else {
            evaluate(&sys, &controller, &scenario.policy, &state, t, &opts)?
        };
        let m = monitor.get_or_insert_with(|| {
            PassivityMonitor::new(monitor_tolerance(row.energy.total, scenario.dt))
        });
        m.observe(t, &row.energy);
        rows.push(row);
    }

    let passivity = monitor
        .map(|m| m.report())
        .unwrap_or_else(|| PassivityMonitor::new(0.0).report());
    Ok(SimLog {
        dof: sys.dof(),
        dt: scenario.dt,
        k_ff: scenario.gains.k_ff,
        ee_target: scenario.policy.target,
        com_target: scenario.com_target,
        com_mode: scenario.gains.com_mode,
        rows,
        passivity,
        divergence,
    })
}

/// Simulate and fail with [`Error::NumericalBlowup`] on divergence.
pub fn run(scenario: &Scenario) -> Result<SimLog> {
    let log = simulate(scenario)?;
    match log.divergence {
        Some(Divergence { time, speed }) => Err(Error::NumericalBlowup { time, speed }),
        None => Ok(log),
    }
}

/// Total mechanical energy (kinetic plus gravitational) along an unforced
/// trajectory, one sample per step including the initial state.
pub fn free_response_energy(
    sys: &CoupledSystem,
    initial: &JointState,
    duration: f64,
    dt: f64,
    integrator: Integrator,
) -> Result<Vec<f64>> {
    let opts = StepOptions {
        integrator,
        sensor: SensorModel::PreviousSample,
        plant_coriolis: true,
        max_joint_speed: f64::INFINITY,
    };
    let n = sys.dof();
    let zero_x = DVector::zeros(n);
    let zero_o = DVector::zeros(sys.operator.dof());
    let energy = |s: &JointState| -> Result<f64> {
        let m = sys.coupled_mass_matrix(&s.q)?;
        Ok(0.5 * s.qd.dot(&(m * &s.qd)) + sys.potential_energy(&s.q)?)
    };
    let steps = (duration / dt + 1e-9).floor() as usize;
    let mut state = initial.clone();
    let mut out = Vec::with_capacity(steps + 1);
    out.push(energy(&state)?);
    for _ in 0..steps {
        let qdd = plant_acceleration(sys, &state.q, &state.qd, &zero_x, &zero_o, true)?;
        state = integrate(sys, &state, &qdd, &zero_x, &zero_o, dt, &opts)?;
        out.push(energy(&state)?);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EffortSeries {
    /// `|f_op|^2` per row [N^2].
    pub instantaneous: Vec<f64>,
    /// Trapezoidal integral of the instantaneous effort [N^2 s].
    pub cumulative: f64,
}

pub fn effort_series(log: &SimLog) -> EffortSeries {
    let instantaneous: Vec<f64> = log.rows.iter().map(|r| r.effort).collect();
    let cumulative = instantaneous
        .windows(2)
        .map(|w| 0.5 * (w[0] + w[1]) * log.dt)
        .sum();
    EffortSeries {
        instantaneous,
        cumulative,
    }
}

/// Fraction of the run averaged for steady-state errors.
pub const STEADY_STATE_WINDOW: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorMetrics {
    /// Mean `|x_ee - x_d|` [m].
    pub ee: f64,
    /// Mean `|x_c - x_c^d|` over the regulated CoM axes [m].
    pub com: f64,
}

pub fn error_metrics(log: &SimLog) -> ErrorMetrics {
    error_metrics_window(log, STEADY_STATE_WINDOW)
}

pub fn error_metrics_window(log: &SimLog, fraction: f64) -> ErrorMetrics {
    let len = log.rows.len();
    if len == 0 {
        return ErrorMetrics { ee: 0.0, com: 0.0 };
    }
    let count = ((len as f64 * fraction).ceil() as usize).clamp(1, len);
    let window = &log.rows[len - count..];
    let axes = log.com_mode.dim();
    let (mut ee, mut com) = (0.0, 0.0);
    for r in window {
        ee += (r.x_ee - log.ee_target).norm();
        com += (r.x_c - log.com_target).rows(0, axes).norm();
    }
    ErrorMetrics {
        ee: ee / count as f64,
        com: com / count as f64,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OscillationReport {
    pub oscillating: bool,
    /// Mean period between alternate sign changes [s]; zero without crossings.
    pub period: f64,
    /// Peak deviation from the window mean [N].
    pub amplitude: f64,
    pub sign_changes: usize,
}

/// Minimum sign alternations in the analysis window.
pub const OSCILLATION_MIN_ALTERNATIONS: usize = 5;
/// Deviation threshold as a fraction of the run's peak force.
pub const OSCILLATION_REL_AMPLITUDE: f64 = 0.05;

/// Oscillation check on each axis of `f_ox` over the final half of the log.
/// A truncated (divergent) log is judged on what was recorded.
pub fn oscillation_report(log: &SimLog) -> OscillationReport {
    let axis = |i: usize| -> Vec<f64> { log.rows.iter().map(|r| r.f_ox[i]).collect() };
    let x = oscillation_report_series(&axis(0), log.dt);
    let y = oscillation_report_series(&axis(1), log.dt);
    match (x.oscillating, y.oscillating) {
        (true, false) => x,
        (false, true) => y,
        _ if x.amplitude >= y.amplitude => x,
        _ => y,
    }
}

pub fn oscillation_report_series(signal: &[f64], dt: f64) -> OscillationReport {
    let quiet = OscillationReport {
        oscillating: false,
        period: 0.0,
        amplitude: 0.0,
        sign_changes: 0,
    };
    if signal.len() < 2 {
        return quiet;
    }
    let peak = signal.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let window = &signal[signal.len() / 2..];
    let mean = window.iter().sum::<f64>() / window.len() as f64;

    let mut amplitude = 0.0_f64;
    let mut crossings = Vec::new();
    let mut last_sign = 0.0;
    for (i, v) in window.iter().enumerate() {
        let d = v - mean;
        amplitude = amplitude.max(d.abs());
        if d != 0.0 {
            let s = d.signum();
            if last_sign != 0.0 && s != last_sign {
                crossings.push(i);
            }
            last_sign = s;
        }
    }
    let period = if crossings.len() >= 2 {
        let span = (crossings[crossings.len() - 1] - crossings[0]) as f64 * dt;
        2.0 * span / (crossings.len() - 1) as f64
    } else {
        0.0
    };
    OscillationReport {
        oscillating: crossings.len() >= OSCILLATION_MIN_ALTERNATIONS
            && amplitude > OSCILLATION_REL_AMPLITUDE * peak,
        period,
        amplitude,
        sign_changes: crossings.len(),
    }
}

/// Metrics of one run, partial or complete.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub k_ff: f64,
    pub cumulative_effort: f64,
    /// Largest absolute component of `f_ox` on each axis [N].
    pub peak_fox: Vector2<f64>,
    pub peak_fox_norm: f64,
    pub errors: ErrorMetrics,
    pub oscillation: OscillationReport,
    pub passivity: PassivityReport,
    pub initial_energy: f64,
    pub final_energy: f64,
    pub divergence: Option<Divergence>,
}

impl RunSummary {
    pub fn from_log(log: &SimLog) -> Self {
        let mut peak_fox = Vector2::<f64>::zeros();
        let mut peak_fox_norm = 0.0_f64;
        for r in &log.rows {
            peak_fox.x = peak_fox.x.max(r.f_ox.x.abs());
            peak_fox.y = peak_fox.y.max(r.f_ox.y.abs());
            peak_fox_norm = peak_fox_norm.max(r.f_ox.norm());
        }
        let energy = |r: Option<&LogRow>| r.map(|r| r.energy.total).unwrap_or(0.0);
        Self {
            k_ff: log.k_ff,
            cumulative_effort: effort_series(log).cumulative,
            peak_fox,
            peak_fox_norm,
            errors: error_metrics(log),
            oscillation: oscillation_report(log),
            passivity: log.passivity,
            initial_energy: energy(log.rows.first()),
            final_energy: energy(log.rows.last()),
            divergence: log.divergence,
        }
    }

    pub fn completed(&self) -> bool {
        self.divergence.is_none()
    }

    /// Final over initial total storage.
    pub fn energy_ratio(&self) -> f64 {
        if self.initial_energy > 0.0 {
            self.final_energy / self.initial_energy
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub k_ff: f64,
    pub outcome: std::result::Result<(SimLog, RunSummary), Error>,
}

impl SweepRow {
    pub fn summary(&self) -> Option<&RunSummary> {
        self.outcome.as_ref().ok().map(|(_, s)| s)
    }

    pub fn log(&self) -> Option<&SimLog> {
        self.outcome.as_ref().ok().map(|(l, _)| l)
    }
}

/// Repeat the scenario for each `k_FF`. Rows come back in input order.
/// `threads <= 1` runs sequentially.
pub fn sweep(scenario: &Scenario, factors: &[f64], threads: usize) -> Result<Vec<SweepRow>> {
    if factors.is_empty() {
        return Err(Error::invalid("k_ff", "sweep needs at least one factor"));
    }
    let one = |k: f64| SweepRow {
        k_ff: k,
        outcome: simulate(&scenario.with_k_ff(k)).map(|log| {
            let summary = RunSummary::from_log(&log);
            (log, summary)
        }),
    };
    if threads <= 1 || factors.len() == 1 {
        return Ok(factors.iter().map(|&k| one(k)).collect());
    }

    let slots: Vec<Mutex<Option<SweepRow>>> = factors.iter().map(|_| Mutex::new(None)).collect();
    let next = Mutex::new(0usize);
    std::thread::scope(|scope| {
        for _ in 0..threads.min(factors.len()) {
            scope.spawn(|| loop {
                let i = {
                    let mut guard = next.lock().expect("sweep index lock");
                    let i = *guard;
                    *guard += 1;
                    i
                };
                if i >= factors.len() {
                    break;
                }
                let row = one(factors[i]);
                *slots[i].lock().expect("sweep slot lock") = Some(row);
            });
        }
    });
    Ok(slots
        .into_iter()
        .map(|m| m.into_inner().expect("sweep slot lock").expect("every slot filled"))
        .collect())
}
