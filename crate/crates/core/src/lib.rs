//! Accelerated primal-dual methods for `min f(x) s.t. Ax = b, x ∈ X`.
//!
//! The crate provides the continuous primal-dual flow and its Runge-Kutta
//! integration, four discretisations of it (implicit, semi-implicit, and two
//! forward-backward variants) with their Lyapunov certificates, the inner
//! solvers they rely on, a decentralized variant for consensus problems on a
//! graph, and an experiment harness.

// `!(x > 0.0)` is used deliberately so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ddo;
pub mod error;
pub mod flow;
pub mod harness;
pub mod inner;
pub mod linalg;
pub mod model;
pub mod schedule;
pub mod solvers;

pub use error::{ApdError, Result};
pub use linalg::{Matrix, Vector};
pub use model::{
    LinearConstraint, ProblemInstance, ProxableFunction, SaddlePoint, SeparableProx, SmoothOracle,
};
pub use schedule::{ScalingState, StepRule};
pub use solvers::{IterateState, Scheme, SolverConfig};
