//! Reference computations that share no code with [`crate::rigidbody`].
//!
//! Positions come from composing 2-D rotations link by link; velocities from
//! complex-step differentiation of those positions, which is exact to
//! rounding; everything else from central differences. Slow, but only used
//! to check the fast paths.

use nalgebra::{Complex, ComplexField, DMatrix, DVector, Vector2};

use crate::rigidbody::PlanarChain;

type C = Complex<f64>;

const COMPLEX_STEP: f64 = 1e-30;

/// Link CoMs and the tip, for any scalar that supports trig.
fn points<T: ComplexField<RealField = f64> + Copy>(chain: &PlanarChain, q: &[T]) -> (Vec<[T; 2]>, [T; 2]) {
    let zero = T::zero();
    let (mut c, mut s) = (T::one(), zero);
    let mut origin = [zero, zero];
    let mut coms = Vec::with_capacity(q.len());
    for (link, &qi) in chain.links().iter().zip(q) {
        // rotate the running frame by qi
        let (ci, si) = (qi.cos(), qi.sin());
        let (nc, ns) = (c * ci - s * si, s * ci + c * si);
        c = nc;
        s = ns;
        let at = |d: f64| [origin[0] + c.scale(d), origin[1] + s.scale(d)];
        coms.push(at(link.com_offset));
        origin = at(link.length);
    }
    (coms, origin)
}

fn real_points(chain: &PlanarChain, q: &DVector<f64>) -> (Vec<Vector2<f64>>, Vector2<f64>) {
    let (coms, tip) = points::<f64>(chain, q.as_slice());
    (
        coms.into_iter().map(|p| Vector2::new(p[0], p[1])).collect(),
        Vector2::new(tip[0], tip[1]),
    )
}

pub fn end_effector(chain: &PlanarChain, q: &DVector<f64>) -> Vector2<f64> {
    real_points(chain, q).1
}

pub fn link_coms(chain: &PlanarChain, q: &DVector<f64>) -> Vec<Vector2<f64>> {
    real_points(chain, q).0
}

/// CoM of chain plus a point mass `operator_mass` at the tip.
pub fn coupled_com(chain: &PlanarChain, operator_mass: f64, q: &DVector<f64>) -> Vector2<f64> {
    let (coms, tip) = real_points(chain, q);
    let mut acc = tip * operator_mass;
    let mut total = operator_mass;
    for (p, link) in coms.iter().zip(chain.links()) {
        acc += p * link.mass;
        total += link.mass;
    }
    acc / total
}

/// Kinetic energy of chain and tip mass at `(q, qd)`.
pub fn kinetic_energy(chain: &PlanarChain, operator_mass: f64, q: &DVector<f64>, qd: &DVector<f64>) -> f64 {
    let perturbed: Vec<C> = q
        .iter()
        .zip(qd.iter())
        .map(|(&a, &v)| C::new(a, COMPLEX_STEP * v))
        .collect();
    let (coms, tip) = points::<C>(chain, &perturbed);
    let vel = |p: &[C; 2]| Vector2::new(p[0].im, p[1].im) / COMPLEX_STEP;
    let mut ke = 0.5 * operator_mass * vel(&tip).norm_squared();
    let mut omega = 0.0;
    for ((p, link), w) in coms.iter().zip(chain.links()).zip(qd.iter()) {
        omega += w;
        ke += 0.5 * link.mass * vel(p).norm_squared() + 0.5 * link.inertia * omega * omega;
    }
    ke
}

/// Mass matrix by polarisation of the kinetic energy.
pub fn mass_matrix(chain: &PlanarChain, operator_mass: f64, q: &DVector<f64>) -> DMatrix<f64> {
    let n = q.len();
    let ke = |v: &DVector<f64>| kinetic_energy(chain, operator_mass, q, v);
    let unit = |i: usize| DVector::from_fn(n, |k, _| if k == i { 1.0 } else { 0.0 });
    let diag: Vec<f64> = (0..n).map(|i| ke(&unit(i))).collect();
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            2.0 * diag[i]
        } else {
            ke(&(unit(i) + unit(j))) - diag[i] - diag[j]
        }
    })
}

/// Gravitational potential of chain and tip mass.
pub fn potential_energy(chain: &PlanarChain, operator_mass: f64, q: &DVector<f64>) -> f64 {
    let (coms, tip) = real_points(chain, q);
    let g = chain.gravity();
    coms.iter()
        .zip(chain.links())
        .map(|(p, l)| l.mass * g * p.y)
        .sum::<f64>()
        + operator_mass * g * tip.y
}

/// Central-difference gradient of a scalar function.
pub fn gradient<F: Fn(&DVector<f64>) -> f64>(f: F, q: &DVector<f64>, h: f64) -> DVector<f64> {
    DVector::from_fn(q.len(), |i, _| {
        let mut a = q.clone();
        let mut b = q.clone();
        a[i] += h;
        b[i] -= h;
        (f(&a) - f(&b)) / (2.0 * h)
    })
}

/// Central-difference Jacobian of a planar point.
pub fn point_jacobian<F: Fn(&DVector<f64>) -> Vector2<f64>>(f: F, q: &DVector<f64>, h: f64) -> DMatrix<f64> {
    let mut jac = DMatrix::zeros(2, q.len());
    for i in 0..q.len() {
        let mut a = q.clone();
        let mut b = q.clone();
        a[i] += h;
        b[i] -= h;
        let d = (f(&a) - f(&b)) / (2.0 * h);
        jac[(0, i)] = d.x;
        jac[(1, i)] = d.y;
    }
    jac
}

/// Moore-Penrose inverse from the SVD.
pub fn pseudo_inverse(jac: &DMatrix<f64>) -> DMatrix<f64> {
    jac.clone()
        .svd(true, true)
        .pseudo_inverse(1e-12)
        .expect("both factors requested")
}
