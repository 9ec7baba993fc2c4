//! Smooth convex parts `h` with gradient, curvature and smoothness constants.

use std::fmt::Debug;

use nalgebra::SymmetricEigen;

use crate::error::{check_len, ApdError, Result};
use crate::linalg::{Matrix, Vector};

/// Differentiable convex function with `μ`-strong convexity and `L`-Lipschitz gradient.
pub trait SmoothOracle: Send + Sync + Debug {
    fn dim(&self) -> usize;
    fn value(&self, x: &Vector) -> f64;
    fn gradient(&self, x: &Vector) -> Vector;
    fn strong_convexity(&self) -> f64;
    fn lipschitz(&self) -> f64;

    /// `(Q, c)` when the function equals `½xᵀQx + cᵀx + const`.
    fn quadratic(&self) -> Option<(Matrix, Vector)> {
        None
    }

    /// `(d, c)` when the function equals `½Σ dᵢxᵢ² + cᵀx + const`.
    fn diagonal(&self) -> Option<(Vector, Vector)> {
        None
    }

    /// `h(x) − h(y)`; quadratic oracles override this to avoid cancellation.
    fn value_difference(&self, x: &Vector, y: &Vector) -> f64 {
        self.value(x) - self.value(y)
    }
}

fn quadratic_difference(q: &Matrix, c: &Vector, x: &Vector, y: &Vector) -> f64 {
    let d = x - y;
    let qd = q * &d;
    (q * y + c).dot(&d) + 0.5 * d.dot(&qd)
}

/// Extreme eigenvalues of a symmetric matrix; tiny negatives from rounding are clamped.
pub(crate) fn spectrum_bounds(q: &Matrix) -> Result<(f64, f64)> {
    if q.nrows() == 0 {
        return Ok((0.0, 0.0));
    }
    let eig = SymmetricEigen::new(q.clone());
    let hi = eig.eigenvalues.max();
    let lo = eig.eigenvalues.min();
    let floor = 1e-10 * hi.abs().max(1.0);
    if lo < -floor {
        return Err(ApdError::InvalidInput(format!(
            "quadratic term is not positive semidefinite (min eigenvalue {lo:e})"
        )));
    }
    Ok((if lo < floor { 0.0 } else { lo }, hi.max(0.0)))
}

/// `½xᵀQx + cᵀx + k` with dense positive semidefinite `Q`.
#[derive(Debug, Clone)]
pub struct Quadratic {
    hessian: Matrix,
    linear: Vector,
    constant: f64,
    mu: f64,
    lip: f64,
}

impl Quadratic {
    pub fn new(hessian: Matrix, linear: Vector) -> Result<Self> {
        let n = hessian.nrows();
        check_len("quadratic hessian columns", n, hessian.ncols())?;
        check_len("quadratic linear term", n, linear.len())?;
        let sym = (&hessian + hessian.transpose()) * 0.5;
        let (mu, lip) = spectrum_bounds(&sym)?;
        Ok(Self {
            hessian: sym,
            linear,
            constant: 0.0,
            mu,
            lip,
        })
    }

    pub fn with_constant(mut self, constant: f64) -> Self {
        self.constant = constant;
        self
    }

    pub fn hessian(&self) -> &Matrix {
        &self.hessian
    }

    pub fn linear(&self) -> &Vector {
        &self.linear
    }
}

impl SmoothOracle for Quadratic {
    fn dim(&self) -> usize {
        self.linear.len()
    }

    fn value(&self, x: &Vector) -> f64 {
        0.5 * x.dot(&(&self.hessian * x)) + self.linear.dot(x) + self.constant
    }

    fn gradient(&self, x: &Vector) -> Vector {
        &self.hessian * x + &self.linear
    }

    fn strong_convexity(&self) -> f64 {
        self.mu
    }

    fn lipschitz(&self) -> f64 {
        self.lip
    }

    fn quadratic(&self) -> Option<(Matrix, Vector)> {
        Some((self.hessian.clone(), self.linear.clone()))
    }

    fn value_difference(&self, x: &Vector, y: &Vector) -> f64 {
        quadratic_difference(&self.hessian, &self.linear, x, y)
    }
}

/// `½Σ dᵢxᵢ² + cᵀx` with `d ≥ 0`. All-zero `d` and `c` gives `h = 0`.
#[derive(Debug, Clone)]
pub struct DiagonalQuadratic {
    curvature: Vector,
    linear: Vector,
}

impl DiagonalQuadratic {
    pub fn new(curvature: Vector, linear: Vector) -> Result<Self> {
        check_len("diagonal quadratic linear term", curvature.len(), linear.len())?;
        if curvature.iter().any(|&d| !(d >= 0.0) || !d.is_finite()) {
            return Err(ApdError::InvalidInput(
                "diagonal curvature must be finite and nonnegative".into(),
            ));
        }
        Ok(Self { curvature, linear })
    }

    /// `½‖x‖²` scaled by `scale`.
    pub fn isotropic(n: usize, scale: f64) -> Self {
        Self {
            curvature: Vector::from_element(n, scale),
            linear: Vector::zeros(n),
        }
    }

    pub fn zero(n: usize) -> Self {
        Self::isotropic(n, 0.0)
    }
}

impl SmoothOracle for DiagonalQuadratic {
    fn dim(&self) -> usize {
        self.curvature.len()
    }

    fn value(&self, x: &Vector) -> f64 {
        0.5 * self.curvature.dot(&x.component_mul(x)) + self.linear.dot(x)
    }

    fn gradient(&self, x: &Vector) -> Vector {
        self.curvature.component_mul(x) + &self.linear
    }

    fn strong_convexity(&self) -> f64 {
        if self.curvature.is_empty() {
            0.0
        } else {
            self.curvature.min()
        }
    }

    fn lipschitz(&self) -> f64 {
        if self.curvature.is_empty() {
            0.0
        } else {
            self.curvature.max()
        }
    }

    fn quadratic(&self) -> Option<(Matrix, Vector)> {
        Some((Matrix::from_diagonal(&self.curvature), self.linear.clone()))
    }

    fn diagonal(&self) -> Option<(Vector, Vector)> {
        Some((self.curvature.clone(), self.linear.clone()))
    }

    fn value_difference(&self, x: &Vector, y: &Vector) -> f64 {
        let d = x - y;
        (self.curvature.component_mul(y) + &self.linear).dot(&d)
            + 0.5 * self.curvature.dot(&d.component_mul(&d))
    }
}

/// `½‖Mx − d‖²`.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    design: Matrix,
    target: Vector,
    gram: Matrix,
    mu: f64,
    lip: f64,
}

impl LeastSquares {
    pub fn new(design: Matrix, target: Vector) -> Result<Self> {
        check_len("least-squares target", design.nrows(), target.len())?;
        let gram = design.transpose() * &design;
        let (mu, lip) = spectrum_bounds(&gram)?;
        Ok(Self {
            design,
            target,
            gram,
            mu,
            lip,
        })
    }
}

impl SmoothOracle for LeastSquares {
    fn dim(&self) -> usize {
        self.design.ncols()
    }

    fn value(&self, x: &Vector) -> f64 {
        0.5 * (&self.design * x - &self.target).norm_squared()
    }

    fn gradient(&self, x: &Vector) -> Vector {
        self.design.transpose() * (&self.design * x - &self.target)
    }

    fn strong_convexity(&self) -> f64 {
        self.mu
    }

    fn lipschitz(&self) -> f64 {
        self.lip
    }

    fn quadratic(&self) -> Option<(Matrix, Vector)> {
        Some((self.gram.clone(), -(self.design.transpose() * &self.target)))
    }

    fn value_difference(&self, x: &Vector, y: &Vector) -> f64 {
        let c = -(self.design.transpose() * &self.target);
        quadratic_difference(&self.gram, &c, x, y)
    }
}

/// `ln(1 + e^{−t})` without overflow.
pub fn softplus_neg(t: f64) -> f64 {
    if t > 0.0 {
        (-t).exp().ln_1p()
    } else {
        -t + t.exp().ln_1p()
    }
}

/// `1 / (1 + e^{t})` without overflow.
pub fn sigmoid_neg(t: f64) -> f64 {
    if t > 0.0 {
        let e = (-t).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + t.exp())
    }
}

/// `Σⱼ ln(1 + exp(−yⱼ aⱼᵀx)) + (δ/2)‖x‖²`, one sample per row of `features`.
#[derive(Debug, Clone)]
pub struct Logistic {
    features: Matrix,
    labels: Vector,
    ridge: f64,
    lip: f64,
}

impl Logistic {
    pub fn new(features: Matrix, labels: Vector, ridge: f64) -> Result<Self> {
        check_len("logistic labels", features.nrows(), labels.len())?;
        if !(ridge >= 0.0) {
            return Err(ApdError::InvalidInput("ridge weight must be nonnegative".into()));
        }
        let mut scaled = features.clone();
        for (i, mut row) in scaled.row_iter_mut().enumerate() {
            row *= labels[i];
        }
        let (_, top) = spectrum_bounds(&(scaled.transpose() * &scaled))?;
        Ok(Self {
            features,
            labels,
            ridge,
            lip: ridge + top / 4.0,
        })
    }
}

impl SmoothOracle for Logistic {
    fn dim(&self) -> usize {
        self.features.ncols()
    }

    fn value(&self, x: &Vector) -> f64 {
        let margins = &self.features * x;
        let loss: f64 = margins
            .iter()
            .zip(self.labels.iter())
            .map(|(m, y)| softplus_neg(y * m))
            .sum();
        loss + 0.5 * self.ridge * x.norm_squared()
    }

    fn gradient(&self, x: &Vector) -> Vector {
        let margins = &self.features * x;
        let weights = Vector::from_iterator(
            margins.len(),
            margins
                .iter()
                .zip(self.labels.iter())
                .map(|(m, y)| -y * sigmoid_neg(y * m)),
        );
        self.features.transpose() * weights + x * self.ridge
    }

    fn strong_convexity(&self) -> f64 {
        self.ridge
    }

    fn lipschitz(&self) -> f64 {
        self.lip
    }
}
