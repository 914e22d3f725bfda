//! Human operator model and the rigid Cartesian coupling between operator and
//! exoskeleton.
//!
//! The operator is attached at the exoskeleton end-effector, so contact
//! position, velocity and acceleration are shared. Operator joint quantities
//! are recovered from the exoskeleton through `qd_o = J_o# J_x qd_x`, with the
//! second-order terms `Jdot qd` dropped on both sides.

use nalgebra::{DMatrix, DVector, Vector2};

use crate::error::{Error, Result};
use crate::rigidbody::{coriolis_from_partials, symmetrize, PlanarChain};
use crate::tasks::pinv_min_norm;

/// Operator dynamics as seen from the coupling point.
///
/// Each provider is evaluated at the exoskeleton configuration; the operator
/// configuration is implied by the coupling constraint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OperatorModel {
    /// A point mass rigidly attached at the end-effector. Its generalized
    /// coordinates are the Cartesian contact coordinates, so `J_o = I`.
    PointMass { mass: f64 },
}

impl OperatorModel {
    pub fn point_mass(mass: f64) -> Result<Self> {
        if !(mass >= 0.0 && mass.is_finite()) {
            return Err(Error::invalid("operator mass", "must be >= 0"));
        }
        Ok(OperatorModel::PointMass { mass })
    }

    pub fn mass(&self) -> f64 {
        match *self {
            OperatorModel::PointMass { mass } => mass,
        }
    }

    /// Number of operator generalized coordinates.
    pub fn dof(&self) -> usize {
        match self {
            OperatorModel::PointMass { .. } => 2,
        }
    }

    /// `J_o`: operator joint velocities to contact-point velocity (2 x dof).
    pub fn coupling_jacobian(&self, _chain: &PlanarChain, _q: &DVector<f64>) -> DMatrix<f64> {
        match self {
            OperatorModel::PointMass { .. } => DMatrix::identity(2, 2),
        }
    }

    /// `M_o`.
    pub fn inertia(&self, _chain: &PlanarChain, _q: &DVector<f64>) -> DMatrix<f64> {
        match *self {
            OperatorModel::PointMass { mass } => DMatrix::identity(2, 2) * mass,
        }
    }

    /// `h_o`, the operator gravity vector in its own coordinates.
    pub fn gravity_vector(&self, chain: &PlanarChain, _q: &DVector<f64>) -> DVector<f64> {
        match *self {
            OperatorModel::PointMass { mass } => DVector::from_vec(vec![0.0, mass * chain.gravity()]),
        }
    }

    /// `J_co`: operator joint velocities to operator CoM velocity (2 x dof).
    pub fn com_jacobian(&self, _chain: &PlanarChain, _q: &DVector<f64>) -> DMatrix<f64> {
        match self {
            OperatorModel::PointMass { .. } => DMatrix::identity(2, 2),
        }
    }

    /// Operator CoM position in the base frame.
    pub fn com_position(&self, chain: &PlanarChain, q: &DVector<f64>) -> Result<Vector2<f64>> {
        match self {
            OperatorModel::PointMass { .. } => chain.end_effector(q),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoupledSystem {
    pub chain: PlanarChain,
    pub operator: OperatorModel,
}

/// Coupling matrices evaluated at one configuration.
#[derive(Debug, Clone)]
pub struct CouplingTerms {
    /// Exoskeleton Jacobian at the contact point (2 x n).
    pub ee_jacobian: DMatrix<f64>,
    /// `J_o`.
    pub op_jacobian: DMatrix<f64>,
    /// `J_o#`.
    pub op_pinv: DMatrix<f64>,
    /// `M_o`.
    pub op_inertia: DMatrix<f64>,
    /// `h_o`.
    pub op_gravity: DVector<f64>,
}

impl CouplingTerms {
    /// `J_x^T J_o#^T`, mapping operator generalized forces to exoskeleton torques.
    pub fn reflect(&self) -> DMatrix<f64> {
        self.ee_jacobian.transpose() * self.op_pinv.transpose()
    }

    /// `J_o# J_x`, mapping exoskeleton joint rates to operator joint rates.
    pub fn transmit(&self) -> DMatrix<f64> {
        &self.op_pinv * &self.ee_jacobian
    }
}

impl CoupledSystem {
    pub fn new(chain: PlanarChain, operator: OperatorModel) -> Self {
        Self { chain, operator }
    }

    pub fn dof(&self) -> usize {
        self.chain.dof()
    }

    pub fn gravity(&self) -> f64 {
        self.chain.gravity()
    }

    pub fn terms(&self, q: &DVector<f64>) -> Result<CouplingTerms> {
        let ee_jacobian = self.chain.end_effector_jacobian(q)?;
        let op_jacobian = self.operator.coupling_jacobian(&self.chain, q);
        let op_pinv = pinv_min_norm(&op_jacobian, 0.0)?;
        Ok(CouplingTerms {
            ee_jacobian,
            op_jacobian,
            op_pinv,
            op_inertia: self.operator.inertia(&self.chain, q),
            op_gravity: self.operator.gravity_vector(&self.chain, q),
        })
    }

    /// `M_xo = M_x + J_x^T J_o#^T M_o J_o# J_x`.
    pub fn coupled_mass_matrix(&self, q: &DVector<f64>) -> Result<DMatrix<f64>> {
        let terms = self.terms(q)?;
        self.coupled_mass_matrix_with(q, &terms)
    }

    pub(crate) fn coupled_mass_matrix_with(
        &self,
        q: &DVector<f64>,
        terms: &CouplingTerms,
    ) -> Result<DMatrix<f64>> {
        let transmit = terms.transmit();
        let reflected = transmit.transpose() * &terms.op_inertia * &transmit;
        Ok(symmetrize(self.chain.mass_matrix(q)? + reflected))
    }

    /// `h_x + J_x^T J_o#^T h_o`.
    pub fn coupled_gravity(&self, q: &DVector<f64>) -> Result<DVector<f64>> {
        let terms = self.terms(q)?;
        Ok(self.chain.gravity_vector(q)? + terms.reflect() * &terms.op_gravity)
    }

    /// Coriolis torques of the coupled inertia `M_xo`.
    pub fn coupled_coriolis(&self, q: &DVector<f64>, qd: &DVector<f64>) -> Result<DVector<f64>> {
        self.chain.check_dim("joint velocity", qd)?;
        let mut partials = self.chain.mass_matrix_partials(q)?;
        match self.operator {
            OperatorModel::PointMass { mass } => {
                let pose = self.chain.forward_kinematics(q)?;
                let last = self.dof() - 1;
                let len = self.chain.links()[last].length;
                let jee = self.chain.point_jacobian_at(&pose, last, len);
                for (k, dm) in partials.iter_mut().enumerate() {
                    let djee = self.chain.point_jacobian_partial_at(&pose, last, len, k);
                    let prod = djee.transpose() * &jee;
                    *dm += mass * (&prod + prod.transpose());
                }
            }
        }
        Ok(coriolis_from_partials(&partials, qd))
    }

    /// Combined potential energy of chain and operator [J].
    pub fn potential_energy(&self, q: &DVector<f64>) -> Result<f64> {
        let op = self.operator.com_position(&self.chain, q)?;
        Ok(self.chain.potential_energy(q)? + self.operator.mass() * self.gravity() * op.y)
    }

    pub fn total_mass(&self) -> f64 {
        self.chain.total_mass() + self.operator.mass()
    }

    /// Centre of mass of chain plus operator.
    pub fn coupled_com(&self, q: &DVector<f64>) -> Result<Vector2<f64>> {
        let (chain_com, chain_mass) = self.chain.chain_com(q)?;
        let op_mass = self.operator.mass();
        let op_com = self.operator.com_position(&self.chain, q)?;
        Ok((chain_mass * chain_com + op_mass * op_com) / (chain_mass + op_mass))
    }

    /// `J_c` (2 x n), Jacobian of [`Self::coupled_com`].
    pub fn coupled_com_jacobian(&self, q: &DVector<f64>) -> Result<DMatrix<f64>> {
        let terms = self.terms(q)?;
        let chain_mass = self.chain.total_mass();
        let op_mass = self.operator.mass();
        let op_com_jac = self.operator.com_jacobian(&self.chain, q) * terms.transmit();
        Ok((chain_mass * self.chain.chain_com_jacobian(q)? + op_mass * op_com_jac)
            / (chain_mass + op_mass))
    }

    /// `qd_o = J_o# J_x qd_x`.
    pub fn couple_velocities(&self, q: &DVector<f64>, qd: &DVector<f64>) -> Result<DVector<f64>> {
        self.chain.check_dim("joint velocity", qd)?;
        Ok(self.terms(q)?.transmit() * qd)
    }

    /// `qdd_o = J_o# J_x qdd_x`.
    pub fn couple_accelerations(
        &self,
        q: &DVector<f64>,
        _qd: &DVector<f64>,
        qdd: &DVector<f64>,
    ) -> Result<DVector<f64>> {
        self.chain.check_dim("joint acceleration", qdd)?;
        Ok(self.terms(q)?.transmit() * qdd)
    }

    /// Force applied by the operator on the exoskeleton, from the operator
    /// equation `M_o qdd_o + h_o = tau_o - J_o^T f_ox`.
    pub fn interaction_force(
        &self,
        q: &DVector<f64>,
        qd: &DVector<f64>,
        qdd: &DVector<f64>,
        tau_o: &DVector<f64>,
    ) -> Result<Vector2<f64>> {
        let terms = self.terms(q)?;
        self.interaction_force_with(&terms, qd, qdd, tau_o)
    }

    pub(crate) fn interaction_force_with(
        &self,
        terms: &CouplingTerms,
        qd: &DVector<f64>,
        qdd: &DVector<f64>,
        tau_o: &DVector<f64>,
    ) -> Result<Vector2<f64>> {
        self.chain.check_dim("joint velocity", qd)?;
        self.chain.check_dim("joint acceleration", qdd)?;
        if tau_o.len() != self.operator.dof() {
            return Err(Error::DimensionMismatch {
                what: "operator torque",
                expected: self.operator.dof(),
                actual: tau_o.len(),
            });
        }
        let qdd_o = terms.transmit() * qdd;
        let residual = tau_o - &terms.op_inertia * qdd_o - &terms.op_gravity;
        let f = terms.op_pinv.transpose() * residual;
        Ok(Vector2::new(f[0], f[1]))
    }
}
