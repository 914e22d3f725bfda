//! Concurrent whole-body controller.
//!
//! The exoskeleton torque is the sum of four parts:
//!
//! 1. feed-forward gravity compensation of exoskeleton and operator,
//! 2. a centroidal impedance on the coupled centre of mass (the primary,
//!    balance task),
//! 3. amplification of the operator action by `k_FF`, reconstructed from the
//!    sensed interaction force and projected into the null space of the
//!    balance task,
//! 4. joint-momentum damping in the null space of all active tasks, which
//!    removes internal motion the tasks cannot see.

use nalgebra::{DMatrix, DVector, Vector2};

use crate::coupling::{CoupledSystem, CouplingTerms};
use crate::error::{Error, Result};
use crate::tasks::{null_projector, null_projector_svd, pinv_min_norm, DEFAULT_PINV_DAMPING};

/// Which coordinates of the coupled CoM the balance task regulates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ComTaskMode {
    /// Horizontal position only; the vertical CoM is left free.
    #[default]
    Horizontal,
    Full,
}

impl ComTaskMode {
    pub fn dim(self) -> usize {
        match self {
            ComTaskMode::Horizontal => 1,
            ComTaskMode::Full => 2,
        }
    }
}

/// How the operator action is reconstructed from the force sensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FeedbackMode {
    /// `h_o + J_o^T f_ox` only; the operator inertial term is dropped.
    #[default]
    Simplified,
    /// Adds `M_o J_o# J_x qdd` using the most recent joint acceleration.
    Full,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gains {
    /// Centroidal stiffness per CoM axis [N/m].
    pub k_pc: Vector2<f64>,
    /// Centroidal damping per CoM axis [N s/m].
    pub k_dc: Vector2<f64>,
    /// Force augmentation factor.
    pub k_ff: f64,
    /// Joint-momentum damping [1/s].
    pub k_jm: f64,
    pub pinv_damping: f64,
    pub com_mode: ComTaskMode,
}

impl Default for Gains {
    fn default() -> Self {
        Self {
            k_pc: Vector2::new(400.0, 400.0),
            k_dc: Vector2::new(40.0, 40.0),
            k_ff: 0.0,
            k_jm: 5.0,
            pinv_damping: DEFAULT_PINV_DAMPING,
            com_mode: ComTaskMode::Horizontal,
        }
    }
}

impl Gains {
    pub fn validate(&self) -> Result<()> {
        let axes = self.com_mode.dim();
        for i in 0..axes {
            if !(self.k_pc[i] > 0.0 && self.k_pc[i].is_finite()) {
                return Err(Error::invalid("k_pc", "must be > 0"));
            }
            if !(self.k_dc[i] > 0.0 && self.k_dc[i].is_finite()) {
                return Err(Error::invalid("k_dc", "must be > 0"));
            }
        }
        if !(self.k_ff >= 0.0 && self.k_ff.is_finite()) {
            return Err(Error::invalid("k_ff", "must be >= 0"));
        }
        if !(self.k_jm >= 0.0 && self.k_jm.is_finite()) {
            return Err(Error::invalid("k_jm", "must be >= 0"));
        }
        if !(self.pinv_damping >= 0.0 && self.pinv_damping.is_finite()) {
            return Err(Error::invalid("pinv_damping", "must be >= 0"));
        }
        Ok(())
    }
}

/// Total exoskeleton torque and its parts.
#[derive(Debug, Clone, PartialEq)]
pub struct TorqueCommand {
    pub tau: DVector<f64>,
    pub gravity_comp: DVector<f64>,
    pub balance: DVector<f64>,
    pub amplification: DVector<f64>,
    pub momentum_damping: DVector<f64>,
}

impl TorqueCommand {
    fn from_parts(
        gravity_comp: DVector<f64>,
        balance: DVector<f64>,
        amplification: DVector<f64>,
        momentum_damping: DVector<f64>,
    ) -> Self {
        let tau = &gravity_comp + &balance + &amplification + &momentum_damping;
        Self {
            tau,
            gravity_comp,
            balance,
            amplification,
            momentum_damping,
        }
    }
}

/// Rows of `J_c` used by the balance task.
pub fn com_task_jacobian(sys: &CoupledSystem, q: &DVector<f64>, mode: ComTaskMode) -> Result<DMatrix<f64>> {
    let jc = sys.coupled_com_jacobian(q)?;
    Ok(jc.rows(0, mode.dim()).into_owned())
}

/// `N_c`, the null-space projector of the balance task.
pub fn balance_null_projector(sys: &CoupledSystem, q: &DVector<f64>, gains: &Gains) -> Result<DMatrix<f64>> {
    let jc = com_task_jacobian(sys, q, gains.com_mode)?;
    let pinv = pinv_min_norm(&jc, gains.pinv_damping)?;
    Ok(null_projector(&jc, &pinv))
}

/// Balance rows stacked on top of the end-effector rows.
pub fn stacked_task_jacobian(sys: &CoupledSystem, q: &DVector<f64>, mode: ComTaskMode) -> Result<DMatrix<f64>> {
    let jc = com_task_jacobian(sys, q, mode)?;
    let jx = sys.chain.end_effector_jacobian(q)?;
    let n = sys.dof();
    let mut js = DMatrix::zeros(jc.nrows() + 2, n);
    js.rows_mut(0, jc.nrows()).copy_from(&jc);
    js.rows_mut(jc.nrows(), 2).copy_from(&jx);
    Ok(js)
}

/// `h_x + J_x^T J_o#^T J_co^T m_o g`.
pub fn gravity_compensation_torque(sys: &CoupledSystem, q: &DVector<f64>) -> Result<DVector<f64>> {
    let terms = sys.terms(q)?;
    gravity_compensation_with(sys, q, &terms)
}

fn gravity_compensation_with(
    sys: &CoupledSystem,
    q: &DVector<f64>,
    terms: &CouplingTerms,
) -> Result<DVector<f64>> {
    let support = DVector::from_vec(vec![0.0, sys.operator.mass() * sys.gravity()]);
    let op_com_jac = sys.operator.com_jacobian(&sys.chain, q);
    Ok(sys.chain.gravity_vector(q)? + terms.reflect() * op_com_jac.transpose() * support)
}

/// Centroidal impedance `J_c^T (k_Pc (x_c^d - x_c) - k_Dc xdot_c)` over the
/// rows selected by `gains.com_mode`.
pub fn balance_torque(
    sys: &CoupledSystem,
    q: &DVector<f64>,
    qd: &DVector<f64>,
    com_target: &Vector2<f64>,
    gains: &Gains,
) -> Result<DVector<f64>> {
    sys.chain.check_dim("joint velocity", qd)?;
    let jc = com_task_jacobian(sys, q, gains.com_mode)?;
    let com = sys.coupled_com(q)?;
    let com_vel = &jc * qd;
    let force = DVector::from_fn(jc.nrows(), |i, _| {
        gains.k_pc[i] * (com_target[i] - com[i]) - gains.k_dc[i] * com_vel[i]
    });
    Ok(jc.transpose() * force)
}

/// Operator action reconstructed from the sensor, projected through
/// `(J_x N_c)^T k_FF J_o#^T`. Uses `h_o + J_o^T f_ox`, omitting the operator
/// inertial term.
pub fn amplification_torque(
    sys: &CoupledSystem,
    q: &DVector<f64>,
    qd: &DVector<f64>,
    f_ox: &Vector2<f64>,
    gains: &Gains,
) -> Result<DVector<f64>> {
    sys.chain.check_dim("joint velocity", qd)?;
    let terms = sys.terms(q)?;
    let nc = balance_null_projector(sys, q, gains)?;
    Ok(amplify(&terms, &nc, &sensed_operator_action(&terms, f_ox), gains.k_ff))
}

/// As [`amplification_torque`] but with the operator inertial term
/// `M_o J_o# J_x qdd` restored, so the feedback reconstructs `tau_o`.
pub fn amplification_torque_full(
    sys: &CoupledSystem,
    q: &DVector<f64>,
    qd: &DVector<f64>,
    qdd: &DVector<f64>,
    f_ox: &Vector2<f64>,
    gains: &Gains,
) -> Result<DVector<f64>> {
    sys.chain.check_dim("joint velocity", qd)?;
    sys.chain.check_dim("joint acceleration", qdd)?;
    let terms = sys.terms(q)?;
    let nc = balance_null_projector(sys, q, gains)?;
    let action = sensed_operator_action(&terms, f_ox) + inertial_term(&terms, qdd);
    Ok(amplify(&terms, &nc, &action, gains.k_ff))
}

/// `h_o + J_o^T f_ox`.
fn sensed_operator_action(terms: &CouplingTerms, f_ox: &Vector2<f64>) -> DVector<f64> {
    let f = DVector::from_vec(vec![f_ox.x, f_ox.y]);
    &terms.op_gravity + terms.op_jacobian.transpose() * f
}

/// `M_o J_o# J_x qdd`.
fn inertial_term(terms: &CouplingTerms, qdd: &DVector<f64>) -> DVector<f64> {
    &terms.op_inertia * (terms.transmit() * qdd)
}

/// `(J_x N_c)^T k_FF J_o#^T action`.
fn amplify(terms: &CouplingTerms, nc: &DMatrix<f64>, action: &DVector<f64>, k_ff: f64) -> DVector<f64> {
    let projected = &terms.ee_jacobian * nc;
    k_ff * projected.transpose() * (terms.op_pinv.transpose() * action)
}

/// `-k_jm N_s M_xo N_s qd`, with `N_s` the orthogonal projector onto the null
/// space of `task_jacobian`: damps internal joint motion only, and never adds
/// energy.
pub fn momentum_damping_torque(
    sys: &CoupledSystem,
    q: &DVector<f64>,
    qd: &DVector<f64>,
    task_jacobian: &DMatrix<f64>,
    gains: &Gains,
) -> Result<DVector<f64>> {
    sys.chain.check_dim("joint velocity", qd)?;
    if gains.k_jm == 0.0 {
        return Ok(DVector::zeros(sys.dof()));
    }
    let mass = sys.coupled_mass_matrix(q)?;
    Ok(momentum_damping_with(&mass, task_jacobian, qd, gains))
}

fn momentum_damping_with(
    mass: &DMatrix<f64>,
    task_jacobian: &DMatrix<f64>,
    qd: &DVector<f64>,
    gains: &Gains,
) -> DVector<f64> {
    let ns = null_projector_svd(task_jacobian);
    // N_s M N_s rather than N_s M: the symmetric form is dissipative
    let internal = &ns * qd;
    -gains.k_jm * (&ns * (mass * internal))
}

/// Full controller output for one state.
///
/// `last_qdd` is only read in [`FeedbackMode::Full`]; `None` is treated as
/// zero acceleration.
#[allow(clippy::too_many_arguments)]
pub fn control_torque(
    sys: &CoupledSystem,
    q: &DVector<f64>,
    qd: &DVector<f64>,
    f_ox: &Vector2<f64>,
    com_target: &Vector2<f64>,
    gains: &Gains,
    mode: FeedbackMode,
    last_qdd: Option<&DVector<f64>>,
) -> Result<TorqueCommand> {
    sys.chain.check_dim("joint velocity", qd)?;
    let terms = sys.terms(q)?;

    let gravity_comp = gravity_compensation_with(sys, q, &terms)?;
    let balance = balance_torque(sys, q, qd, com_target, gains)?;

    let nc = balance_null_projector(sys, q, gains)?;
    let mut action = sensed_operator_action(&terms, f_ox);
    if let (FeedbackMode::Full, Some(qdd)) = (mode, last_qdd) {
        sys.chain.check_dim("joint acceleration", qdd)?;
        action += inertial_term(&terms, qdd);
    }
    let amplification = amplify(&terms, &nc, &action, gains.k_ff);

    let momentum_damping = if gains.k_jm == 0.0 {
        DVector::zeros(sys.dof())
    } else {
        let mass = sys.coupled_mass_matrix_with(q, &terms)?;
        let js = stacked_task_jacobian(sys, q, gains.com_mode)?;
        momentum_damping_with(&mass, &js, qd, gains)
    };

    Ok(TorqueCommand::from_parts(
        gravity_comp,
        balance,
        amplification,
        momentum_damping,
    ))
}

/// Controller instance for one simulation. Holds the one-step acceleration
/// memory used by [`FeedbackMode::Full`].
#[derive(Debug, Clone)]
pub struct Controller {
    pub gains: Gains,
    pub com_target: Vector2<f64>,
    pub mode: FeedbackMode,
    last_qdd: Option<DVector<f64>>,
}

impl Controller {
    pub fn new(gains: Gains, com_target: Vector2<f64>, mode: FeedbackMode) -> Result<Self> {
        gains.validate()?;
        Ok(Self {
            gains,
            com_target,
            mode,
            last_qdd: None,
        })
    }

    pub fn command(
        &self,
        sys: &CoupledSystem,
        q: &DVector<f64>,
        qd: &DVector<f64>,
        f_ox: &Vector2<f64>,
    ) -> Result<TorqueCommand> {
        control_torque(
            sys,
            q,
            qd,
            f_ox,
            &self.com_target,
            &self.gains,
            self.mode,
            self.last_qdd.as_ref(),
        )
    }

    pub fn record_acceleration(&mut self, qdd: &DVector<f64>) {
        self.last_qdd = Some(qdd.clone());
    }

    pub fn last_acceleration(&self) -> Option<&DVector<f64>> {
        self.last_qdd.as_ref()
    }
}
