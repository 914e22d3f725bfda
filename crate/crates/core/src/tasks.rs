//! Task-space algebra: minimal-norm pseudoinverses, null-space projectors and
//! task-space inertias.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Singular values below this make an undamped pseudoinverse fail.
pub const SINGULARITY_TOLERANCE: f64 = 1e-10;

/// Damping used by the controller when none is configured.
pub const DEFAULT_PINV_DAMPING: f64 = 1e-6;

/// Right inverse `J^T (J J^T + damping^2 I)^-1`.
///
/// With zero damping this is the Moore-Penrose inverse of a full-row-rank
/// `J` and fails with [`Error::SingularTask`] when `J` loses rank.
pub fn pinv_min_norm(jac: &DMatrix<f64>, damping: f64) -> Result<DMatrix<f64>> {
    let (m, n) = jac.shape();
    if m > n {
        return Err(Error::SingularTask { sigma_min: 0.0 });
    }
    if m == 0 {
        return Ok(DMatrix::zeros(n, 0));
    }
    if damping == 0.0 {
        let sigma_min = jac
            .singular_values()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        if !(sigma_min >= SINGULARITY_TOLERANCE) {
            return Err(Error::SingularTask { sigma_min });
        }
    }
    let mut gram = jac * jac.transpose();
    for i in 0..m {
        gram[(i, i)] += damping * damping;
    }
    let chol = gram
        .cholesky()
        .ok_or(Error::SingularTask { sigma_min: 0.0 })?;
    // J# = J^T G^-1 = (G^-1 J)^T since G is symmetric
    Ok(chol.solve(jac).transpose())
}

/// `I - J# J`.
pub fn null_projector(jac: &DMatrix<f64>, pinv: &DMatrix<f64>) -> DMatrix<f64> {
    let n = jac.ncols();
    DMatrix::identity(n, n) - pinv * jac
}

/// Orthogonal projector onto `null(J)` from the SVD; singular values below
/// `SINGULARITY_TOLERANCE * sigma_max` count as zero.
///
/// Equal to [`null_projector`] with the exact pseudoinverse when `J` has
/// full row rank, and still defined for tall or rank-deficient `J`.
pub fn null_projector_svd(jac: &DMatrix<f64>) -> DMatrix<f64> {
    let n = jac.ncols();
    let svd = jac.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let scale = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let mut proj = DMatrix::identity(n, n);
    for (i, s) in svd.singular_values.iter().enumerate() {
        if *s > SINGULARITY_TOLERANCE * scale.max(1.0) {
            let row = v_t.row(i);
            proj -= row.transpose() * row;
        }
    }
    0.5 * (&proj + proj.transpose())
}

/// `J#^T M J#`, the inertia seen in task coordinates.
pub fn task_inertia(mass: &DMatrix<f64>, pinv: &DMatrix<f64>) -> DMatrix<f64> {
    let lambda = pinv.transpose() * mass * pinv;
    0.5 * (&lambda + lambda.transpose())
}

pub type JacobianFn = Arc<dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync>;

/// A prioritised impedance task `J^T (k_P (x_d - x) - k_D xdot)`.
#[derive(Clone)]
pub struct TaskSpec {
    pub name: String,
    pub jacobian: JacobianFn,
    pub stiffness: DMatrix<f64>,
    pub damping: DMatrix<f64>,
    pub target: DVector<f64>,
}

impl fmt::Debug for TaskSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TaskSpec")
            .field("name", &self.name)
            .field("stiffness", &self.stiffness)
            .field("damping", &self.damping)
            .field("target", &self.target)
            .finish_non_exhaustive()
    }
}

impl TaskSpec {
    pub fn new(
        name: impl Into<String>,
        jacobian: JacobianFn,
        stiffness: DMatrix<f64>,
        damping: DMatrix<f64>,
        target: DVector<f64>,
    ) -> Result<Self> {
        let name = name.into();
        let m = target.len();
        for (label, k) in [("stiffness", &stiffness), ("damping", &damping)] {
            if k.shape() != (m, m) {
                return Err(Error::DimensionMismatch {
                    what: "task gain",
                    expected: m,
                    actual: k.nrows(),
                });
            }
            if !is_spd(k) {
                return Err(Error::invalid(
                    format!("{name}.{label}"),
                    "must be symmetric positive-definite",
                ));
            }
        }
        Ok(Self {
            name,
            jacobian,
            stiffness,
            damping,
            target,
        })
    }

    pub fn dim(&self) -> usize {
        self.target.len()
    }

    pub fn jacobian_at(&self, q: &DVector<f64>) -> DMatrix<f64> {
        (self.jacobian)(q)
    }

    /// Copy with both gains multiplied by `factor` (the amplified task).
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            stiffness: &self.stiffness * factor,
            damping: &self.damping * factor,
            ..self.clone()
        }
    }

    /// Task-space impedance force for position `x` and velocity `xd`.
    pub fn force(&self, x: &DVector<f64>, xd: &DVector<f64>) -> DVector<f64> {
        &self.stiffness * (&self.target - x) - &self.damping * xd
    }
}

/// Symmetric (to 1e-12 relative) with a successful Cholesky factorisation.
pub fn is_spd(k: &DMatrix<f64>) -> bool {
    if !k.is_square() {
        return false;
    }
    let scale = k.amax().max(1.0);
    if (k - k.transpose()).amax() > 1e-12 * scale {
        return false;
    }
    k.clone().cholesky().is_some()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn pinv_of_unit_row() {
        let j = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let p = pinv_min_norm(&j, 0.0).unwrap();
        assert_relative_eq!(p, DMatrix::from_row_slice(2, 1, &[1.0, 0.0]), epsilon = 1e-15);
        let n = null_projector(&j, &p);
        assert_relative_eq!(
            n,
            DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]),
            epsilon = 1e-15
        );
    }

    #[test]
    fn pinv_singular_without_damping() {
        let j = DMatrix::from_row_slice(1, 2, &[0.0, 0.0]);
        assert!(matches!(pinv_min_norm(&j, 0.0), Err(Error::SingularTask { .. })));
        // damping keeps it defined
        let p = pinv_min_norm(&j, 1e-3).unwrap();
        assert_eq!(p.norm(), 0.0);
    }

    #[test]
    fn square_invertible_has_trivial_null_space() {
        let j = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, -0.5, 3.0]);
        let p = pinv_min_norm(&j, 0.0).unwrap();
        assert!(null_projector(&j, &p).amax() < 1e-14);
    }

    #[test]
    fn overdetermined_rejected() {
        let j = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        assert!(pinv_min_norm(&j, 0.0).is_err());
    }

    #[test]
    fn svd_projector_handles_tall_and_deficient() {
        let wide = DMatrix::from_row_slice(1, 3, &[1.0, 2.0, 2.0]);
        let p = pinv_min_norm(&wide, 0.0).unwrap();
        assert_relative_eq!(null_projector_svd(&wide), null_projector(&wide, &p), epsilon = 1e-14);

        let tall = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        assert!(null_projector_svd(&tall).amax() < 1e-14);

        // two parallel rows leave a one-dimensional null space
        let flat = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 2.0, 2.0]);
        let n = null_projector_svd(&flat);
        assert_relative_eq!(n.trace(), 1.0, epsilon = 1e-12);
        assert!((&flat * &n).amax() < 1e-14);
    }

    #[test]
    fn identity_task_inertia() {
        let m = DMatrix::from_row_slice(2, 2, &[3.0, 0.5, 0.5, 2.0]);
        let p = pinv_min_norm(&DMatrix::identity(2, 2), 0.0).unwrap();
        assert_relative_eq!(task_inertia(&m, &p), m, epsilon = 1e-15);

        let point_mass = DMatrix::identity(2, 2) * 7.0;
        assert_relative_eq!(task_inertia(&point_mass, &p), point_mass, epsilon = 1e-15);
    }

    #[test]
    fn task_spec_rejects_indefinite_gains() {
        let jac: JacobianFn = Arc::new(|_q: &DVector<f64>| DMatrix::identity(2, 2));
        let good = DMatrix::identity(2, 2);
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let target = DVector::zeros(2);
        assert!(TaskSpec::new("t", jac.clone(), good.clone(), good.clone(), target.clone()).is_ok());
        assert!(TaskSpec::new("t", jac, good, bad, target).is_err());
    }
}
