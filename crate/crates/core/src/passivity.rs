//! Energy accounting for the closed loop.
//!
//! The coupled system stores energy in one kinetic tank and three potential
//! tanks: the balance impedance, the operator impedance and the amplified
//! copy of the operator impedance (gains scaled by `k_FF`). Damping is the
//! only dissipation; the null-space projection of the amplified task can
//! block energy exchange but never creates any.

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};

use crate::coupling::CoupledSystem;
use crate::cwbc::Gains;
use crate::error::Result;
use crate::simkit::OperatorPolicy;

/// Coefficient `c` of the discretisation allowance `c dt^2` [J/s^2].
///
/// Calibrated on the default scenario at `k_FF = 0`, whose storage falls on
/// every step (largest per-step change about -9e-8 J at 1 ms); what is left
/// is a floor for rounding noise, 1e-7 J per step at 1 ms.
pub const DISCRETIZATION_SLACK: f64 = 0.1;

/// Relative allowance for floating-point noise in the total storage.
pub const RELATIVE_SLACK: f64 = 1e-9;

/// Monitor tolerance `1e-9 S(0) + c dt^2`.
pub fn monitor_tolerance(initial_total: f64, dt: f64) -> f64 {
    RELATIVE_SLACK * initial_total + DISCRETIZATION_SLACK * dt * dt
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyBreakdown {
    /// `0.5 qd^T M_xo qd` [J].
    pub kinetic: f64,
    pub potential_balance: f64,
    pub potential_operator: f64,
    pub potential_amplified: f64,
    pub total: f64,
    /// Sum of the per-task analytic rates `-xd^T k_D xd` [W].
    pub dissipation_rate_estimate: f64,
}

/// `0.5 xd^T Lambda xd + 0.5 eps^T k_P eps`.
pub fn storage_task(
    lambda: &DMatrix<f64>,
    xd: &DVector<f64>,
    eps: &DVector<f64>,
    k_p: &DMatrix<f64>,
) -> f64 {
    0.5 * xd.dot(&(lambda * xd)) + 0.5 * eps.dot(&(k_p * eps))
}

/// `-xd^T k_D xd`.
pub fn dissipation_rate(xd: &DVector<f64>, k_d: &DMatrix<f64>) -> f64 {
    -xd.dot(&(k_d * xd))
}

/// State matrix of `Lambda xdd = -k_P x - k_D xd` with `Lambda` frozen.
pub fn task_state_matrix(lambda: &DMatrix<f64>, k_p: &DMatrix<f64>, k_d: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let m = lambda.nrows();
    let inv = lambda.clone().try_inverse()?;
    let mut a = DMatrix::zeros(2 * m, 2 * m);
    a.view_mut((0, m), (m, m)).fill_with_identity();
    a.view_mut((m, 0), (m, m)).copy_from(&(-&inv * k_p));
    a.view_mut((m, m), (m, m)).copy_from(&(-&inv * k_d));
    Some(a)
}

fn quad2(k: &Matrix2<f64>, v: &Vector2<f64>) -> f64 {
    v.dot(&(k * v))
}

/// Energy in every tank of the coupled closed loop.
pub fn storage_total(
    sys: &CoupledSystem,
    q: &DVector<f64>,
    qd: &DVector<f64>,
    com_target: &Vector2<f64>,
    gains: &Gains,
    policy: &OperatorPolicy,
) -> Result<EnergyBreakdown> {
    sys.chain.check_dim("joint velocity", qd)?;
    let mass = sys.coupled_mass_matrix(q)?;
    let kinetic = 0.5 * qd.dot(&(&mass * qd));

    let axes = gains.com_mode.dim();
    let com = sys.coupled_com(q)?;
    let com_vel = sys.coupled_com_jacobian(q)? * qd;
    let mut potential_balance = 0.0;
    let mut balance_rate = 0.0;
    for i in 0..axes {
        let e = com[i] - com_target[i];
        potential_balance += 0.5 * gains.k_pc[i] * e * e;
        balance_rate -= gains.k_dc[i] * com_vel[i] * com_vel[i];
    }

    let ee = sys.chain.end_effector(q)?;
    let ee_vel = sys.chain.end_effector_jacobian(q)? * qd;
    let ee_vel = Vector2::new(ee_vel[0], ee_vel[1]);
    let eps = ee - policy.target;
    let potential_operator = 0.5 * quad2(&policy.stiffness, &eps);
    let potential_amplified = gains.k_ff * potential_operator;
    let operator_rate = -(1.0 + gains.k_ff) * quad2(&policy.damping, &ee_vel);

    Ok(EnergyBreakdown {
        kinetic,
        potential_balance,
        potential_operator,
        potential_amplified,
        total: kinetic + potential_balance + potential_operator + potential_amplified,
        dissipation_rate_estimate: balance_rate + operator_rate,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Verdict {
    Ok,
    /// The total rose by `magnitude` joules more than the tolerance allows.
    Violation { magnitude: f64 },
}

/// `Ok` iff `curr.total <= prev.total + tolerance`.
pub fn monitor_step(prev: &EnergyBreakdown, curr: &EnergyBreakdown, tolerance: f64) -> Verdict {
    let rise = curr.total - prev.total;
    if rise <= tolerance {
        Verdict::Ok
    } else {
        Verdict::Violation {
            magnitude: rise - tolerance,
        }
    }
}

/// Run-level accumulation of monitor verdicts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PassivityReport {
    pub tolerance: f64,
    pub steps: usize,
    pub violations: usize,
    pub max_violation: f64,
    pub first_violation_time: Option<f64>,
    /// Largest per-step rise of the total storage, whether or not it violated.
    pub max_rise: f64,
}

#[derive(Debug, Clone)]
pub struct PassivityMonitor {
    report: PassivityReport,
    prev: Option<EnergyBreakdown>,
}

impl PassivityMonitor {
    pub fn new(tolerance: f64) -> Self {
        Self {
            report: PassivityReport {
                tolerance,
                steps: 0,
                violations: 0,
                max_violation: 0.0,
                first_violation_time: None,
                max_rise: f64::NEG_INFINITY,
            },
            prev: None,
        }
    }

    pub fn observe(&mut self, t: f64, energy: &EnergyBreakdown) -> Verdict {
        let verdict = match &self.prev {
            None => Verdict::Ok,
            Some(prev) => {
                self.report.steps += 1;
                self.report.max_rise = self.report.max_rise.max(energy.total - prev.total);
                monitor_step(prev, energy, self.report.tolerance)
            }
        };
        if let Verdict::Violation { magnitude } = verdict {
            self.report.violations += 1;
            self.report.max_violation = self.report.max_violation.max(magnitude);
            self.report.first_violation_time.get_or_insert(t);
        }
        self.prev = Some(*energy);
        verdict
    }

    pub fn report(&self) -> PassivityReport {
        self.report
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn energy(total: f64) -> EnergyBreakdown {
        EnergyBreakdown {
            kinetic: total,
            total,
            ..Default::default()
        }
    }

    #[test]
    fn storage_examples() {
        let i2 = DMatrix::<f64>::identity(2, 2);
        let zero = DVector::zeros(2);
        assert_eq!(storage_task(&i2, &zero, &zero, &i2), 0.0);
        let lambda = &i2 * 10.0;
        let xd = DVector::from_vec(vec![1.0, 0.0]);
        assert_relative_eq!(storage_task(&lambda, &xd, &zero, &i2), 5.0);
    }

    #[test]
    fn dissipation_examples() {
        let i2 = DMatrix::<f64>::identity(2, 2);
        assert_eq!(dissipation_rate(&DVector::zeros(2), &i2), 0.0);
        assert_eq!(dissipation_rate(&DVector::from_vec(vec![1.0, 1.0]), &i2), -2.0);
    }

    #[test]
    fn monitor_flags_rises() {
        let eta = 1e-6;
        assert_eq!(monitor_step(&energy(1.0), &energy(1.0), eta), Verdict::Ok);
        match monitor_step(&energy(1.0), &energy(1.0 + 10.0 * eta), eta) {
            Verdict::Violation { magnitude } => {
                assert!(magnitude > 8.9 * eta && magnitude <= 9.0 * eta + 1e-15)
            }
            Verdict::Ok => panic!("rise not flagged"),
        }
    }

    #[test]
    fn monitor_accumulates() {
        let mut m = PassivityMonitor::new(0.0);
        m.observe(0.0, &energy(3.0));
        m.observe(0.1, &energy(2.0));
        m.observe(0.2, &energy(2.5));
        m.observe(0.3, &energy(2.6));
        let r = m.report();
        assert_eq!(r.steps, 3);
        assert_eq!(r.violations, 2);
        assert_eq!(r.first_violation_time, Some(0.2));
        assert_relative_eq!(r.max_violation, 0.5);
    }

    #[test]
    fn state_matrix_of_damped_oscillator_is_hurwitz() {
        let lambda = DMatrix::from_row_slice(2, 2, &[3.0, 0.4, 0.4, 2.0]);
        let kp = DMatrix::<f64>::identity(2, 2) * 400.0;
        let kd = DMatrix::<f64>::identity(2, 2) * 40.0;
        let a = task_state_matrix(&lambda, &kp, &kd).unwrap();
        for ev in a.complex_eigenvalues().iter() {
            assert!(ev.re < 0.0, "eigenvalue {ev}");
        }
    }
}
