//! Linear constraint operators `Ax = b`.

use std::fmt::Debug;
use std::sync::Arc;

use crate::error::{check_len, ApdError, Result};
use crate::linalg::{power_iteration, Matrix, Vector};

pub trait LinearOperator: Send + Sync + Debug {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;
    fn apply(&self, x: &Vector) -> Vector;
    fn apply_adjoint(&self, y: &Vector) -> Vector;

    /// Dense representation, when one is stored.
    fn dense(&self) -> Option<&Matrix> {
        None
    }
}

impl LinearOperator for Matrix {
    fn rows(&self) -> usize {
        self.nrows()
    }

    fn cols(&self) -> usize {
        self.ncols()
    }

    fn apply(&self, x: &Vector) -> Vector {
        self * x
    }

    fn apply_adjoint(&self, y: &Vector) -> Vector {
        self.tr_mul(y)
    }

    fn dense(&self) -> Option<&Matrix> {
        Some(self)
    }
}

const NORM_SEED: u64 = 0x05ee_da11;

/// `‖C‖₂` by power iteration on `CᵀC` from a fixed random start.
pub fn operator_norm_estimate(op: &dyn LinearOperator, tol: f64, max_iter: usize) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(ApdError::InvalidInput("tolerance must be positive".into()));
    }
    let apply = |u: &Vector| op.apply_adjoint(&op.apply(u));
    match power_iteration(op.cols(), apply, tol, max_iter, NORM_SEED) {
        Ok((rho, _)) if rho > 0.0 => Ok(rho.sqrt()),
        Ok(_) => Err(ApdError::InvalidInput("operator is zero".into())),
        Err((rho, iterations)) => Err(ApdError::NormEstimate {
            estimate: rho.max(0.0).sqrt(),
            iterations,
        }),
    }
}

/// `Ax = b` with a cached `‖A‖` and a declared lower bound `σ_min(A)` (0 if unknown).
#[derive(Debug, Clone)]
pub struct LinearConstraint {
    op: Arc<dyn LinearOperator>,
    rhs: Vector,
    op_norm: f64,
    sigma_min: f64,
}

impl LinearConstraint {
    pub fn new(op: Arc<dyn LinearOperator>, rhs: Vector) -> Result<Self> {
        check_len("constraint right-hand side", op.rows(), rhs.len())?;
        let op_norm = match operator_norm_estimate(op.as_ref(), 1e-13, 100_000) {
            Ok(s) => s,
            Err(ApdError::InvalidInput(_)) => 0.0,
            Err(e) => return Err(e),
        };
        Ok(Self {
            op,
            rhs,
            op_norm,
            sigma_min: 0.0,
        })
    }

    pub fn dense(matrix: Matrix, rhs: Vector) -> Result<Self> {
        Self::new(Arc::new(matrix), rhs)
    }

    /// Declares `σ_min(A) ≥ sigma_min > 0` (full column rank). Never estimated.
    pub fn with_sigma_min(mut self, sigma_min: f64) -> Result<Self> {
        if !(sigma_min >= 0.0) || sigma_min > self.op_norm * (1.0 + 1e-9) {
            return Err(ApdError::InvalidInput(format!(
                "declared σ_min {sigma_min} must lie in [0, ‖A‖]"
            )));
        }
        self.sigma_min = sigma_min;
        Ok(self)
    }

    pub fn rows(&self) -> usize {
        self.op.rows()
    }

    pub fn cols(&self) -> usize {
        self.op.cols()
    }

    pub fn rhs(&self) -> &Vector {
        &self.rhs
    }

    pub fn op_norm(&self) -> f64 {
        self.op_norm
    }

    pub fn sigma_min(&self) -> f64 {
        self.sigma_min
    }

    pub fn operator(&self) -> &dyn LinearOperator {
        self.op.as_ref()
    }

    pub fn dense_matrix(&self) -> Option<&Matrix> {
        self.op.dense()
    }

    pub fn apply(&self, x: &Vector) -> Vector {
        self.op.apply(x)
    }

    pub fn apply_adjoint(&self, y: &Vector) -> Vector {
        self.op.apply_adjoint(y)
    }

    /// `Ax − b`.
    pub fn residual(&self, x: &Vector) -> Vector {
        self.op.apply(x) - &self.rhs
    }
}
