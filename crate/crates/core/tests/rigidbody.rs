use cwbc_core::coupling::{CoupledSystem, OperatorModel};
use cwbc_core::oracle;
use cwbc_core::rigidbody::{coriolis_matrix_from_partials, JointState, Link, PlanarChain, STANDARD_GRAVITY};
use cwbc_core::simkit::{free_response_energy, Integrator};
use cwbc_core::Error;
use nalgebra::{Complex, DMatrix, DVector, Vector2};
use proptest::prelude::*;
use std::f64::consts::PI;

fn chain5() -> PlanarChain {
    // uneven on purpose: different lengths, masses, CoM offsets and inertias
    let links = vec![
        Link { length: 0.35, mass: 3.0, com_offset: 0.12, inertia: 0.04 },
        Link { length: 0.30, mass: 2.5, com_offset: 0.18, inertia: 0.02 },
        Link::rod(0.25, 1.5),
        Link { length: 0.40, mass: 4.0, com_offset: 0.10, inertia: 0.07 },
        Link { length: 0.20, mass: 6.0, com_offset: 0.19, inertia: 0.01 },
    ];
    PlanarChain::new(links, STANDARD_GRAVITY).unwrap()
}

fn angles(n: usize) -> impl Strategy<Value = DVector<f64>> {
    prop::collection::vec(-PI..PI, n).prop_map(DVector::from_vec)
}

fn rates(n: usize) -> impl Strategy<Value = DVector<f64>> {
    prop::collection::vec(-3.0..3.0f64, n).prop_map(DVector::from_vec)
}

fn fd_jacobian<F: Fn(&DVector<f64>) -> Vector2<f64>>(f: F, q: &DVector<f64>) -> DMatrix<f64> {
    oracle::point_jacobian(f, q, 1e-7)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn fk_matches_complex_exponential_sum(q in angles(5)) {
        let chain = chain5();
        let mut theta = 0.0;
        let mut tip = Complex::new(0.0, 0.0);
        for (l, qi) in chain.links().iter().zip(q.iter()) {
            theta += qi;
            tip += Complex::from_polar(l.length, theta);
        }
        let ee = chain.end_effector(&q).unwrap();
        prop_assert!((ee.x - tip.re).abs() < 1e-12 && (ee.y - tip.im).abs() < 1e-12);
    }

    #[test]
    fn jacobians_match_finite_differences(q in angles(5), frac in 0.0..1.0f64) {
        let chain = chain5();
        let jx = chain.end_effector_jacobian(&q).unwrap();
        let fd = fd_jacobian(|q| chain.end_effector(q).unwrap(), &q);
        prop_assert!((jx - fd).amax() < 1e-6);

        for i in 0..5 {
            let offset = frac * chain.links()[i].length;
            let j = chain.point_jacobian(&q, i, offset).unwrap();
            let fd = fd_jacobian(|q| chain.forward_kinematics(q).unwrap().point_on_link(i, offset), &q);
            prop_assert!((j - fd).amax() < 1e-6, "link {}", i);
        }

        let jcom = chain.chain_com_jacobian(&q).unwrap();
        let fd = fd_jacobian(|q| chain.chain_com(q).unwrap().0, &q);
        prop_assert!((jcom - fd).amax() < 1e-6);
    }

    #[test]
    fn kinetic_energy_matches_per_link_oracle(q in angles(5), qd in rates(5)) {
        let chain = chain5();
        let m = chain.mass_matrix(&q).unwrap();
        let ke = 0.5 * qd.dot(&(&m * &qd));
        let reference = oracle::kinetic_energy(&chain, 0.0, &q, &qd);
        prop_assert!((ke - reference).abs() <= 1e-10 * reference.abs().max(1e-12));
    }

    #[test]
    fn gravity_is_gradient_of_potential(q in angles(5)) {
        let chain = chain5();
        let h = chain.gravity_vector(&q).unwrap();
        let fd = oracle::gradient(|q| chain.potential_energy(q).unwrap(), &q, 1e-6);
        prop_assert!((h - fd).amax() < 1e-6);
        // and the potential itself against the rotation-composed oracle
        let u = chain.potential_energy(&q).unwrap();
        prop_assert!((u - oracle::potential_energy(&chain, 0.0, &q)).abs() < 1e-12);
    }

    #[test]
    fn mass_partials_match_finite_differences(q in angles(5)) {
        let chain = chain5();
        let parts = chain.mass_matrix_partials(&q).unwrap();
        for (k, dm) in parts.iter().enumerate() {
            let h = 1e-6;
            let mut a = q.clone();
            let mut b = q.clone();
            a[k] += h;
            b[k] -= h;
            let fd = (chain.mass_matrix(&a).unwrap() - chain.mass_matrix(&b).unwrap()) / (2.0 * h);
            prop_assert!((dm - fd).amax() < 1e-6, "k = {}", k);
        }
    }

    #[test]
    fn mdot_minus_two_c_is_skew(q in angles(5), qd in rates(5)) {
        let chain = chain5();
        let parts = chain.mass_matrix_partials(&q).unwrap();
        let mdot = parts.iter().zip(qd.iter()).fold(DMatrix::zeros(5, 5), |acc, (p, v)| acc + p * *v);
        let c = coriolis_matrix_from_partials(&parts, &qd);
        let s = &mdot - 2.0 * &c;
        prop_assert!((&s + s.transpose()).amax() < 1e-10);
        prop_assert!(qd.dot(&(&s * &qd)).abs() < 1e-9);
        // C qd is what coriolis_vector returns
        let cv = chain.coriolis_vector(&q, &qd).unwrap();
        prop_assert!((c * &qd - cv).amax() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn mass_matrix_symmetric_positive_definite(q in angles(5)) {
        let m = chain5().mass_matrix(&q).unwrap();
        prop_assert!((&m - m.transpose()).amax() == 0.0);
        prop_assert!(m.clone().cholesky().is_some());
        let min = m.symmetric_eigenvalues().min();
        prop_assert!(min > 0.0, "min eigenvalue {}", min);
    }
}

#[test]
fn mass_matrix_matches_polarised_oracle() {
    let chain = chain5();
    let q = DVector::from_vec(vec![0.3, -1.1, 2.0, 0.4, -0.7]);
    let m = chain.mass_matrix(&q).unwrap();
    let reference = oracle::mass_matrix(&chain, 0.0, &q);
    assert!((&m - &reference).norm() / reference.norm() < 1e-10);
}

#[test]
fn single_link_has_no_coriolis() {
    let chain = PlanarChain::new(vec![Link::rod(0.5, 2.0)], STANDARD_GRAVITY).unwrap();
    for (q, qd) in [(0.0, 1.0), (1.3, -4.0), (-2.0, 10.0)] {
        let c = chain
            .coriolis_vector(&DVector::from_element(1, q), &DVector::from_element(1, qd))
            .unwrap();
        assert_eq!(c[0], 0.0);
    }
}

#[test]
fn pendulum_torque_at_horizontal() {
    // rod of 2 kg, 0.5 m, horizontal: m g l/2
    let chain = PlanarChain::new(vec![Link::rod(0.5, 2.0)], STANDARD_GRAVITY).unwrap();
    let h = chain.gravity_vector(&DVector::zeros(1)).unwrap();
    assert!((h[0] - 2.0 * STANDARD_GRAVITY * 0.25).abs() < 1e-12);
    let h = chain.gravity_vector(&DVector::from_element(1, PI / 2.0)).unwrap();
    assert!(h[0].abs() < 1e-12);
}

#[test]
fn unforced_weightless_double_pendulum_conserves_energy_to_integrator_order() {
    let chain = PlanarChain::uniform(2, 0.5, 1.5, 0.0).unwrap();
    let sys = CoupledSystem::new(chain, OperatorModel::point_mass(0.0).unwrap());
    let start = JointState::new(DVector::from_vec(vec![0.4, 1.2]), DVector::from_vec(vec![2.0, -3.0])).unwrap();
    let drift = |integrator, dt| {
        let e = free_response_energy(&sys, &start, 1.0, dt, integrator).unwrap();
        e.iter().map(|v| (v - e[0]).abs()).fold(0.0, f64::max) / e[0]
    };
    let (coarse, fine) = (drift(Integrator::Rk4Zoh, 4e-3), drift(Integrator::Rk4Zoh, 2e-3));
    assert!(coarse / fine > 12.0, "rk4 ratio {}", coarse / fine);
    assert!(fine < 1e-7);
    // symplectic Euler: bounded, first order
    let (coarse, fine) = (
        drift(Integrator::SemiImplicitEuler, 4e-3),
        drift(Integrator::SemiImplicitEuler, 2e-3),
    );
    assert!(coarse / fine > 1.6 && fine < 1e-2, "euler {coarse} {fine}");
}

#[test]
fn wrong_dimension_is_rejected() {
    let chain = chain5();
    let short = DVector::zeros(4);
    assert!(matches!(
        chain.mass_matrix(&short),
        Err(Error::DimensionMismatch { expected: 5, actual: 4, .. })
    ));
    assert!(chain.point_jacobian(&DVector::zeros(5), 5, 0.1).is_err());
}
