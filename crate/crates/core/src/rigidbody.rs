//! Kinematics and dynamics of a planar serial chain with revolute joints and
//! a fixed base.
//!
//! Conventions: base frame x right, y up, gravity along -y. Joint angles are
//! relative, so the absolute angle of link `i` is the sum of `q[0..=i]`.
//! Links are indexed from 0; link `n - 1` carries the end-effector.

use nalgebra::{DMatrix, DVector, Vector2};

use crate::error::{Error, Result};

pub const STANDARD_GRAVITY: f64 = 9.81;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Link {
    /// Joint-to-joint length [m].
    pub length: f64,
    /// [kg]
    pub mass: f64,
    /// Distance from the proximal joint to the link CoM along the link axis [m].
    pub com_offset: f64,
    /// Rotational inertia about the link CoM [kg m^2].
    pub inertia: f64,
}

impl Link {
    /// Uniform slender rod: CoM at mid-length, inertia `m l^2 / 12`.
    pub fn rod(length: f64, mass: f64) -> Self {
        Self {
            length,
            mass,
            com_offset: 0.5 * length,
            inertia: mass * length * length / 12.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanarChain {
    links: Vec<Link>,
    gravity: f64,
}

/// Joint positions and velocities of a chain.
#[derive(Debug, Clone, PartialEq)]
pub struct JointState {
    pub q: DVector<f64>,
    pub qd: DVector<f64>,
}

impl JointState {
    pub fn new(q: DVector<f64>, qd: DVector<f64>) -> Result<Self> {
        if q.len() != qd.len() {
            return Err(Error::DimensionMismatch {
                what: "joint velocity",
                expected: q.len(),
                actual: qd.len(),
            });
        }
        Ok(Self { q, qd })
    }

    pub fn at_rest(q: DVector<f64>) -> Self {
        let n = q.len();
        Self {
            q,
            qd: DVector::zeros(n),
        }
    }
}

/// Joint positions (base, each joint, end-effector) and absolute link angles.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainPose {
    pub points: Vec<Vector2<f64>>,
    pub angles: Vec<f64>,
}

impl ChainPose {
    pub fn end_effector(&self) -> Vector2<f64> {
        *self.points.last().expect("pose always holds the base point")
    }

    /// Material point of link `index` at `offset` from its proximal joint.
    pub fn point_on_link(&self, index: usize, offset: f64) -> Vector2<f64> {
        let a = self.angles[index];
        self.points[index] + offset * Vector2::new(a.cos(), a.sin())
    }
}

/// Planar cross product `z x v`.
#[inline]
fn perp(v: Vector2<f64>) -> Vector2<f64> {
    Vector2::new(-v.y, v.x)
}

impl PlanarChain {
    pub fn new(links: Vec<Link>, gravity: f64) -> Result<Self> {
        if links.is_empty() {
            return Err(Error::invalid("links", "a chain needs at least one link"));
        }
        for (i, l) in links.iter().enumerate() {
            if !(l.length > 0.0 && l.length.is_finite()) {
                return Err(Error::invalid(format!("length[{i}]"), "must be > 0"));
            }
            if !(l.mass > 0.0 && l.mass.is_finite()) {
                return Err(Error::invalid(format!("mass[{i}]"), "must be > 0"));
            }
            if !(0.0..=l.length).contains(&l.com_offset) {
                return Err(Error::invalid(
                    format!("com_offset[{i}]"),
                    "must lie within [0, length]",
                ));
            }
            if !(l.inertia >= 0.0 && l.inertia.is_finite()) {
                return Err(Error::invalid(format!("inertia[{i}]"), "must be >= 0"));
            }
        }
        if !(gravity >= 0.0 && gravity.is_finite()) {
            return Err(Error::invalid("gravity", "must be >= 0"));
        }
        Ok(Self { links, gravity })
    }

    /// `n` identical uniform rods.
    pub fn uniform(n: usize, length: f64, mass: f64, gravity: f64) -> Result<Self> {
        Self::new(vec![Link::rod(length, mass); n], gravity)
    }

    pub fn dof(&self) -> usize {
        self.links.len()
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn gravity(&self) -> f64 {
        self.gravity
    }

    pub fn total_mass(&self) -> f64 {
        self.links.iter().map(|l| l.mass).sum()
    }

    pub fn with_gravity(&self, gravity: f64) -> Result<Self> {
        Self::new(self.links.clone(), gravity)
    }

    pub(crate) fn check_dim(&self, what: &'static str, v: &DVector<f64>) -> Result<()> {
        if v.len() != self.dof() {
            return Err(Error::DimensionMismatch {
                what,
                expected: self.dof(),
                actual: v.len(),
            });
        }
        Ok(())
    }

    pub fn forward_kinematics(&self, q: &DVector<f64>) -> Result<ChainPose> {
        self.check_dim("joint position", q)?;
        let mut points = Vec::with_capacity(self.dof() + 1);
        let mut angles = Vec::with_capacity(self.dof());
        let mut p = Vector2::zeros();
        let mut theta = 0.0;
        points.push(p);
        for (link, qi) in self.links.iter().zip(q.iter()) {
            theta += qi;
            p += link.length * Vector2::new(theta.cos(), theta.sin());
            angles.push(theta);
            points.push(p);
        }
        Ok(ChainPose { points, angles })
    }

    pub fn end_effector(&self, q: &DVector<f64>) -> Result<Vector2<f64>> {
        Ok(self.forward_kinematics(q)?.end_effector())
    }

    fn check_point(&self, index: usize, offset: f64) -> Result<()> {
        let link = self.links.get(index).ok_or(Error::LinkIndexOutOfRange {
            index,
            links: self.dof(),
        })?;
        if !(0.0..=link.length).contains(&offset) {
            return Err(Error::OffsetOutOfRange {
                index,
                offset,
                length: link.length,
            });
        }
        Ok(())
    }

    /// Linear-velocity Jacobian (2 x n) of the point at `offset` along link `index`.
    pub fn point_jacobian(&self, q: &DVector<f64>, index: usize, offset: f64) -> Result<DMatrix<f64>> {
        self.check_point(index, offset)?;
        let pose = self.forward_kinematics(q)?;
        Ok(self.point_jacobian_at(&pose, index, offset))
    }

    pub(crate) fn point_jacobian_at(&self, pose: &ChainPose, index: usize, offset: f64) -> DMatrix<f64> {
        let p = pose.point_on_link(index, offset);
        let mut jac = DMatrix::zeros(2, self.dof());
        for j in 0..=index {
            let col = perp(p - pose.points[j]);
            jac[(0, j)] = col.x;
            jac[(1, j)] = col.y;
        }
        jac
    }

    /// Partial derivative of [`Self::point_jacobian`] with respect to `q[k]`.
    ///
    /// Column `j` is `z x (p - o_j)`; differentiating twice around `z` gives
    /// `-(p - o_max(j,k))` for `j, k <= index` and zero otherwise.
    pub(crate) fn point_jacobian_partial_at(
        &self,
        pose: &ChainPose,
        index: usize,
        offset: f64,
        k: usize,
    ) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(2, self.dof());
        if k > index {
            return d;
        }
        let p = pose.point_on_link(index, offset);
        for j in 0..=index {
            let r = p - pose.points[j.max(k)];
            d[(0, j)] = -r.x;
            d[(1, j)] = -r.y;
        }
        d
    }

    pub fn end_effector_jacobian(&self, q: &DVector<f64>) -> Result<DMatrix<f64>> {
        let last = self.dof() - 1;
        self.point_jacobian(q, last, self.links[last].length)
    }

    /// Joint-space inertia from per-link CoM Jacobians.
    pub fn mass_matrix(&self, q: &DVector<f64>) -> Result<DMatrix<f64>> {
        let pose = self.forward_kinematics(q)?;
        let n = self.dof();
        let mut m = DMatrix::zeros(n, n);
        for (i, link) in self.links.iter().enumerate() {
            let jv = self.point_jacobian_at(&pose, i, link.com_offset);
            m += link.mass * jv.transpose() * &jv;
            // angular Jacobian of link i is ones in columns 0..=i
            for r in 0..=i {
                for c in 0..=i {
                    m[(r, c)] += link.inertia;
                }
            }
        }
        Ok(symmetrize(m))
    }

    /// `dM/dq_k` for every `k`.
    pub fn mass_matrix_partials(&self, q: &DVector<f64>) -> Result<Vec<DMatrix<f64>>> {
        let pose = self.forward_kinematics(q)?;
        let n = self.dof();
        let mut parts = vec![DMatrix::zeros(n, n); n];
        for (i, link) in self.links.iter().enumerate() {
            let jv = self.point_jacobian_at(&pose, i, link.com_offset);
            for (k, dm) in parts.iter_mut().enumerate().take(i + 1) {
                let djv = self.point_jacobian_partial_at(&pose, i, link.com_offset, k);
                let prod = djv.transpose() * &jv;
                *dm += link.mass * (&prod + prod.transpose());
            }
        }
        Ok(parts)
    }

    /// Gravitational potential energy of all link CoMs [J].
    pub fn potential_energy(&self, q: &DVector<f64>) -> Result<f64> {
        let pose = self.forward_kinematics(q)?;
        Ok(self
            .links
            .iter()
            .enumerate()
            .map(|(i, l)| l.mass * self.gravity * pose.point_on_link(i, l.com_offset).y)
            .sum())
    }

    /// Gradient of [`Self::potential_energy`]; enters the dynamics as `M qdd + h = tau`.
    pub fn gravity_vector(&self, q: &DVector<f64>) -> Result<DVector<f64>> {
        let pose = self.forward_kinematics(q)?;
        let mut h = DVector::zeros(self.dof());
        for (i, l) in self.links.iter().enumerate() {
            let jv = self.point_jacobian_at(&pose, i, l.com_offset);
            h += l.mass * self.gravity * jv.row(1).transpose();
        }
        Ok(h)
    }

    /// Coriolis and centripetal torques `C(q, qd) qd` from the Christoffel
    /// symbols of the mass matrix.
    pub fn coriolis_vector(&self, q: &DVector<f64>, qd: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_dim("joint velocity", qd)?;
        Ok(coriolis_from_partials(&self.mass_matrix_partials(q)?, qd))
    }

    /// Chain centre of mass and total mass.
    pub fn chain_com(&self, q: &DVector<f64>) -> Result<(Vector2<f64>, f64)> {
        let pose = self.forward_kinematics(q)?;
        let total = self.total_mass();
        let weighted = self
            .links
            .iter()
            .enumerate()
            .fold(Vector2::zeros(), |acc, (i, l)| {
                acc + l.mass * pose.point_on_link(i, l.com_offset)
            });
        Ok((weighted / total, total))
    }

    pub fn chain_com_jacobian(&self, q: &DVector<f64>) -> Result<DMatrix<f64>> {
        let pose = self.forward_kinematics(q)?;
        let mut jac = DMatrix::zeros(2, self.dof());
        for (i, l) in self.links.iter().enumerate() {
            jac += l.mass * self.point_jacobian_at(&pose, i, l.com_offset);
        }
        Ok(jac / self.total_mass())
    }
}

/// Christoffel-symbol matrix `C(q, qd)` with `C qd` the Coriolis vector and
/// `Mdot - 2C` skew-symmetric.
pub fn coriolis_matrix_from_partials(partials: &[DMatrix<f64>], qd: &DVector<f64>) -> DMatrix<f64> {
    let n = qd.len();
    let mut c = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let mut s = 0.0;
            for k in 0..n {
                let gamma = 0.5 * (partials[k][(i, j)] + partials[j][(i, k)] - partials[i][(j, k)]);
                s += gamma * qd[k];
            }
            c[(i, j)] = s;
        }
    }
    c
}

pub fn coriolis_from_partials(partials: &[DMatrix<f64>], qd: &DVector<f64>) -> DVector<f64> {
    coriolis_matrix_from_partials(partials, qd) * qd
}

pub(crate) fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    0.5 * (&m + m.transpose())
}
