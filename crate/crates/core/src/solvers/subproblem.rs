//! Proximal maps of the whole objective, `prox_{η f_β}` over `X`, for the
//! implicit and semi-implicit schemes.

use nalgebra::SymmetricEigen;

use crate::error::{check_len, ApdError, Result};
use crate::linalg::{Matrix, Vector};
use crate::model::{ProblemInstance, ProxableFunction, SeparableProx};

/// `f = ½Σ dᵢxᵢ² + cᵀx + g` with a coordinatewise `g`, exposed as a proximable function.
///
/// Completing the square turns `prox_{η f}` into `prox_{η/(1+ηd) g}` evaluated at
/// `(u − ηc)/(1 + ηd)`, coordinate by coordinate.
#[derive(Debug, Clone)]
pub struct CompositeProx {
    curvature: Vector,
    linear: Vector,
    g: SeparableProx,
}

impl CompositeProx {
    pub fn new(curvature: Vector, linear: Vector, g: SeparableProx) -> Result<Self> {
        check_len("composite linear term", curvature.len(), linear.len())?;
        if !g.is_coordinatewise() {
            return Err(ApdError::Unsupported(
                "composite prox needs a coordinatewise nonsmooth part".into(),
            ));
        }
        Ok(Self { curvature, linear, g })
    }

    fn shifted(&self, eta: f64, u: &Vector) -> (Vector, Vector) {
        let scale = self.curvature.map(|d| 1.0 + eta * d);
        let etas = scale.map(|s| eta / s);
        let arg = (u - &self.linear * eta).component_div(&scale);
        (etas, arg)
    }
}

impl ProxableFunction for CompositeProx {
    fn dim(&self) -> Option<usize> {
        Some(self.curvature.len())
    }

    fn value(&self, x: &Vector) -> f64 {
        0.5 * self.curvature.dot(&x.component_mul(x)) + self.linear.dot(x) + self.g.value(x)
    }

    fn prox(&self, eta: f64, x: &Vector) -> Result<Vector> {
        check_len("composite prox argument", self.curvature.len(), x.len())?;
        if !(eta > 0.0) || !eta.is_finite() {
            return Err(ApdError::InvalidInput(format!("prox step must be positive, got {eta}")));
        }
        let (etas, arg) = self.shifted(eta, x);
        self.g.prox_coordinatewise(&etas, &arg)
    }

    fn gen_jacobian(&self, eta: f64, u: &Vector) -> Result<Vector> {
        let (etas, arg) = self.shifted(eta, u);
        let inner = self.g.jacobian_coordinatewise(&etas, &arg)?;
        Ok(Vector::from_fn(u.len(), |i, _| inner[i] / (1.0 + eta * self.curvature[i])))
    }

    fn project(&self, x: &Vector) -> Result<Vector> {
        self.g.project(x)
    }

    fn contains(&self, x: &Vector, tol: f64) -> bool {
        self.g.contains(x, tol)
    }
}

/// `x ↦ prox_{η f_β}(x)` over `X`, prepared once per run.
#[derive(Debug, Clone)]
pub enum FullProx {
    /// `f_β = ½xᵀQx + cᵀx` on `ℝⁿ`, with `Q = UΛUᵀ` cached.
    Spectral {
        basis: Matrix,
        eigenvalues: Vector,
        linear: Vector,
    },
    Composite(CompositeProx),
}

impl FullProx {
    pub fn build(p: &ProblemInstance, beta: f64) -> Result<Self> {
        if p.nonsmooth.is_zero_unconstrained() {
            if let Some((q, c)) = p.smooth.quadratic() {
                let (q, c) = if beta > 0.0 {
                    let a = p.constraint.dense_matrix().ok_or_else(|| {
                        ApdError::Unsupported("β > 0 with an implicit prox needs a dense A".into())
                    })?;
                    (q + a.transpose() * a * beta, c - a.transpose() * p.constraint.rhs() * beta)
                } else {
                    (q, c)
                };
                let eig = SymmetricEigen::new((&q + q.transpose()) * 0.5);
                return Ok(Self::Spectral {
                    basis: eig.eigenvectors,
                    eigenvalues: eig.eigenvalues.map(|l| l.max(0.0)),
                    linear: c,
                });
            }
        }
        if beta > 0.0 {
            return Err(ApdError::Unsupported(
                "β > 0 needs a quadratic smooth part with g = 0; use β = 0".into(),
            ));
        }
        let (d, c) = p.smooth.diagonal().ok_or_else(|| {
            ApdError::Unsupported(
                "implicit proximal steps need a quadratic smooth part (diagonal when g ≠ 0)".into(),
            )
        })?;
        let g = p.nonsmooth.as_separable().ok_or_else(|| {
            ApdError::Unsupported("implicit proximal steps need a library nonsmooth part".into())
        })?;
        Ok(Self::Composite(CompositeProx::new(d, c, g.clone())?))
    }

    pub fn apply(&self, eta: f64, u: &Vector) -> Result<Vector> {
        match self {
            Self::Spectral {
                basis,
                eigenvalues,
                linear,
            } => {
                let rhs = basis.tr_mul(&(u - linear * eta));
                let scaled = Vector::from_fn(rhs.len(), |i, _| rhs[i] / (1.0 + eta * eigenvalues[i]));
                Ok(basis * scaled)
            }
            Self::Composite(c) => c.prox(eta, u),
        }
    }
}
