use std::sync::Arc;

use cwbc_core::oracle;
use cwbc_core::rigidbody::{PlanarChain, STANDARD_GRAVITY};
use cwbc_core::tasks::{
    is_spd, null_projector, null_projector_svd, pinv_min_norm, task_inertia, TaskSpec,
};
use cwbc_core::Error;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn wide(m: usize, n: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-2.0..2.0f64, m * n).prop_map(move |v| DMatrix::from_vec(m, n, v))
}

fn well_conditioned(jac: &DMatrix<f64>) -> bool {
    let s = jac.singular_values();
    s.min() > 0.05 * s.max()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn undamped_pinv_is_moore_penrose(jac in wide(2, 5)) {
        prop_assume!(well_conditioned(&jac));
        let pinv = pinv_min_norm(&jac, 0.0).unwrap();
        let reference = oracle::pseudo_inverse(&jac);
        prop_assert!((&pinv - &reference).amax() < 1e-9);
        prop_assert!((&jac * &pinv - DMatrix::<f64>::identity(2, 2)).amax() < 1e-9);
        // the Penrose conditions
        prop_assert!((&jac * &pinv * &jac - &jac).amax() < 1e-9);
        prop_assert!((&pinv * &jac * &pinv - &pinv).amax() < 1e-9);
        let jp = &pinv * &jac;
        prop_assert!((&jp - jp.transpose()).amax() < 1e-9);
    }

    #[test]
    fn projector_annihilates_and_is_idempotent(jac in wide(3, 5)) {
        prop_assume!(well_conditioned(&jac));
        let pinv = pinv_min_norm(&jac, 0.0).unwrap();
        let n = null_projector(&jac, &pinv);
        prop_assert!((&jac * &n).amax() < 1e-10);
        prop_assert!((&n * &n - &n).amax() < 1e-10);
        prop_assert!((&n - n.transpose()).amax() < 1e-10);
        prop_assert!((n - null_projector_svd(&jac)).amax() < 1e-9);
    }

    #[test]
    fn pinv_solution_has_minimal_norm(jac in wide(2, 5), b in prop::collection::vec(-1.0..1.0f64, 2),
                                      z in prop::collection::vec(-1.0..1.0f64, 5)) {
        prop_assume!(well_conditioned(&jac));
        let b = DVector::from_vec(b);
        let pinv = pinv_min_norm(&jac, 0.0).unwrap();
        let x = &pinv * &b;
        // any other solution differs by a null-space vector
        let other = &x + null_projector(&jac, &pinv) * DVector::from_vec(z);
        prop_assert!((&jac * &other - &b).amax() < 1e-9);
        prop_assert!(x.norm() <= other.norm() + 1e-12);
    }

    #[test]
    fn damped_pinv_converges_as_damping_vanishes(jac in wide(2, 4)) {
        prop_assume!(well_conditioned(&jac));
        let exact = pinv_min_norm(&jac, 0.0).unwrap();
        let mut prev = f64::INFINITY;
        for lambda in [1e-1, 1e-2, 1e-3, 1e-4] {
            let err = (pinv_min_norm(&jac, lambda).unwrap() - &exact).amax();
            prop_assert!(err < prev);
            prev = err;
        }
        prop_assert!(prev < 1e-5);
    }

    #[test]
    fn task_inertia_is_positive_semidefinite(q in prop::collection::vec(-3.0..3.0f64, 4)) {
        let chain = PlanarChain::uniform(4, 0.3, 2.0, STANDARD_GRAVITY).unwrap();
        let q = DVector::from_vec(q);
        let jac = chain.end_effector_jacobian(&q).unwrap();
        let pinv = pinv_min_norm(&jac, 1e-6).unwrap();
        let lambda = task_inertia(&chain.mass_matrix(&q).unwrap(), &pinv);
        prop_assert!((&lambda - lambda.transpose()).amax() == 0.0);
        prop_assert!(lambda.symmetric_eigenvalues().min() >= -1e-10);
    }
}

#[test]
fn rank_deficient_jacobian_needs_damping() {
    let jac = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0]);
    assert!(matches!(pinv_min_norm(&jac, 0.0), Err(Error::SingularTask { .. })));
    let damped = pinv_min_norm(&jac, 1e-3).unwrap();
    assert!(damped.iter().all(|v| v.is_finite()));
    // the SVD projector still spans the right 2-D null space
    let n = null_projector_svd(&jac);
    assert!((&jac * &n).amax() < 1e-12);
    assert!((n.trace() - 2.0).abs() < 1e-12);
}

#[test]
fn tall_jacobian_is_rejected_but_projectable() {
    let jac = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
    assert!(pinv_min_norm(&jac, 0.1).is_err());
    assert!(null_projector_svd(&jac).amax() < 1e-12);
}

#[test]
fn empty_task_leaves_everything_free() {
    let jac = DMatrix::<f64>::zeros(0, 3);
    let pinv = pinv_min_norm(&jac, 0.0).unwrap();
    assert_eq!(pinv.shape(), (3, 0));
    assert_eq!(null_projector(&jac, &pinv), DMatrix::identity(3, 3));
}

#[test]
fn task_spec_checks_gains() {
    let jac: cwbc_core::tasks::JacobianFn = Arc::new(|_q: &DVector<f64>| DMatrix::identity(2, 3));
    let k = DMatrix::identity(2, 2) * 100.0;
    let d = DMatrix::identity(2, 2) * 10.0;
    let target = DVector::from_vec(vec![0.5, 0.2]);
    let task = TaskSpec::new("ee", jac.clone(), k.clone(), d.clone(), target.clone()).unwrap();
    assert_eq!(task.dim(), 2);
    assert_eq!(task.jacobian_at(&DVector::zeros(3)).shape(), (2, 3));

    let f = task.force(&DVector::from_vec(vec![0.4, 0.2]), &DVector::from_vec(vec![0.0, 1.0]));
    assert!((f - DVector::from_vec(vec![10.0, -10.0])).amax() < 1e-12);
    let amplified = task.scaled(2.0);
    assert_eq!(amplified.stiffness, &k * 2.0);

    let skew = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
    assert!(TaskSpec::new("bad", jac.clone(), skew, d.clone(), target.clone()).is_err());
    let negative = -DMatrix::<f64>::identity(2, 2);
    assert!(!is_spd(&negative));
    assert!(TaskSpec::new("bad", jac.clone(), k, negative, target).is_err());
    assert!(TaskSpec::new("bad", jac, d.clone(), d, DVector::zeros(3)).is_err());
}
