//! Problem data: smooth and proximable parts, constraints, and saddle references.

pub mod constraint;
pub mod file;
pub mod problem;
pub mod prox;
pub mod smooth;

pub use constraint::{operator_norm_estimate, LinearConstraint, LinearOperator};
pub use problem::{
    evaluate_augmented_lagrangian, kkt_residual, lagrangian_gap, planted_instance, solve_reference_saddle,
    PlantedSpec, ProblemInstance, SaddlePoint,
};
pub use prox::{FeasibleSet, ProxableFunction, Regularizer, SeparableProx};
pub use smooth::{DiagonalQuadratic, LeastSquares, Logistic, Quadratic, SmoothOracle};
