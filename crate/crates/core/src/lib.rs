//! Simulation and control of a human operator rigidly coupled to a planar
//! exoskeleton at a Cartesian point.

// `!(x > 0.0)` guards are deliberate: they reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coupling;
pub mod cwbc;
pub mod error;
pub mod oracle;
pub mod passivity;
pub mod rigidbody;
pub mod simkit;
pub mod tasks;
pub mod validation;

pub use coupling::{CoupledSystem, OperatorModel};
pub use cwbc::{ComTaskMode, Controller, FeedbackMode, Gains, TorqueCommand};
pub use error::{Error, Result};
pub use passivity::EnergyBreakdown;
pub use rigidbody::{JointState, Link, PlanarChain};
pub use simkit::{Integrator, OperatorPolicy, Scenario, SimLog};
