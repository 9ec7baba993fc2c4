//! Discrete Lyapunov function, residual metrics and the a-priori certificates.

use crate::error::{ApdError, Result};
use crate::model::{lagrangian_gap, ProblemInstance, SaddlePoint};
use crate::solvers::IterateState;

/// `E_k = L_β(x, λ*) − L_β(x*, λ) + (γ/2)‖v − x*‖² + (θ/2)‖λ − λ*‖²`.
pub fn discrete_lyapunov(
    s: &IterateState,
    p: &ProblemInstance,
    saddle: &SaddlePoint,
    beta: f64,
) -> f64 {
    let gap = lagrangian_gap(p, &s.x, &s.lambda, saddle, beta);
    gap + 0.5 * s.scaling.gamma * (&s.v - &saddle.x).norm_squared()
        + 0.5 * s.scaling.theta * (&s.lambda - &saddle.lambda).norm_squared()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualMetrics {
    pub obj_gap: f64,
    pub feasibility: f64,
    pub lagrangian_gap: f64,
}

/// Largest negative Lagrangian gap tolerated before the reference is declared wrong.
pub const GAP_TOLERANCE: f64 = 1e-10;

/// `(|f(x) − f*|, ‖Ax − b‖, L_β(x, λ*) − L_β(x*, λ))`.
pub fn residual_metrics(
    s: &IterateState,
    p: &ProblemInstance,
    saddle: &SaddlePoint,
    beta: f64,
) -> Result<ResidualMetrics> {
    let gap = lagrangian_gap(p, &s.x, &s.lambda, saddle, beta);
    if gap < -GAP_TOLERANCE {
        return Err(ApdError::InvalidReference { gap });
    }
    let dh = p.smooth.value_difference(&s.x, &saddle.x);
    let dg = p.nonsmooth.value(&s.x) - p.nonsmooth.value(&saddle.x);
    Ok(ResidualMetrics {
        obj_gap: (dh + dg).abs(),
        feasibility: p.constraint.residual(&s.x).norm(),
        lagrangian_gap: gap,
    })
}

/// Constants of the bounds `‖Ax_k − b‖ ≤ θ_k R₀` and `|f(x_k) − f*| ≤ θ_k(E₀ + R₀‖λ*‖)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Certificate {
    pub e0: f64,
    pub r0: f64,
    pub lambda_star_norm: f64,
}

impl Certificate {
    pub fn from_initial(
        s0: &IterateState,
        p: &ProblemInstance,
        saddle: &SaddlePoint,
        beta: f64,
    ) -> Self {
        let e0 = discrete_lyapunov(s0, p, saddle, beta);
        let r0 = (2.0 * e0.max(0.0)).sqrt()
            + (&s0.lambda - &saddle.lambda).norm()
            + p.constraint.residual(&s0.x).norm();
        Self {
            e0,
            r0,
            lambda_star_norm: saddle.lambda.norm(),
        }
    }

    pub fn feasibility_bound(&self, theta: f64) -> f64 {
        theta * self.r0
    }

    pub fn objective_bound(&self, theta: f64) -> f64 {
        theta * (self.e0 + self.r0 * self.lambda_star_norm)
    }
}
