//! One iteration of the decentralized APD method and of the two baselines.

use super::graph::MixingMatrices;
use super::problem::DdoProblem;
use crate::error::{ApdError, Result};
use crate::inner::{augmented_consensus_solve, ConsensusMethod, ConsensusOperator};
use crate::linalg::Vector;
use crate::schedule::{advance_scaling, step_size, ScalingState, StepRule};

/// Primal iterates only; the multiplier is `θ⁻¹√A x` and never formed.
#[derive(Debug, Clone, PartialEq)]
pub struct ApdDdoState {
    pub x: Vector,
    pub v: Vector,
    pub scaling: ScalingState,
    pub k: usize,
}

impl ApdDdoState {
    pub fn new(x0: Vector, gamma0: f64) -> Self {
        Self {
            v: x0.clone(),
            x: x0,
            scaling: ScalingState::new(gamma0),
            k: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApdDdoConfig {
    pub method: ConsensusMethod,
    pub inner_max_iter: usize,
}

impl Default for ApdDdoConfig {
    fn default() -> Self {
        Self {
            method: ConsensusMethod::PcgJacobi,
            inner_max_iter: 10_000,
        }
    }
}

/// Inner relative tolerance `‖Ax‖/10`, clamped to `[1e-12, 0.5]` and lifted to
/// the rounding floor of the shifted residual for a solution of size `‖v‖`.
fn inner_tolerance(p: &DdoProblem, ax_norm: f64, eps: f64, v_norm: f64, s_norm: f64) -> f64 {
    let requested = (ax_norm / 10.0).clamp(1e-12, 0.5);
    if s_norm == 0.0 {
        return requested;
    }
    let max_deg = p.laplacian().diag().iter().copied().fold(0.0, f64::max);
    let floor = 100.0 * f64::EPSILON * ((2.0 * max_deg + eps) * v_norm + s_norm) / s_norm;
    requested.max(floor)
}

/// Returns the next state and the inner iteration count.
pub fn apd_ddo_step(s: &ApdDdoState, p: &DdoProblem, cfg: &ApdDdoConfig) -> Result<(ApdDdoState, usize)> {
    let (mu, lip) = (p.mu(), p.lipschitz());
    let alpha = step_size(StepRule::SemiApdfb { l_beta: lip }, s.scaling)?;
    let (theta, gamma) = (s.scaling.theta, s.scaling.gamma);
    let tau = gamma + mu * alpha;
    let y = (&s.x + &s.v * alpha) / (1.0 + alpha);
    let w = (&s.v * gamma + &y * (mu * alpha)) / tau;
    let z = &w - p.gradient(&y) * (alpha / tau);
    let eps = tau * theta / (alpha * alpha);
    // Ax has no consensus component in exact arithmetic; dividing rounding
    // noise in that component by ε ~ θ would otherwise swamp v once x agrees.
    let ax = p.remove_consensus_component(&p.consensus_apply(&s.x));
    let rhs = &z * eps - &ax / alpha;
    let tol = inner_tolerance(p, ax.norm(), eps, s.v.norm(), rhs.norm());
    let op = ConsensusOperator::new(p.laplacian(), p.block());
    let out = augmented_consensus_solve(&op, eps, &rhs, cfg.method, tol, cfg.inner_max_iter, Some(&s.v))?;
    if !out.converged {
        return Err(ApdError::NotConverged {
            what: "augmented consensus solve",
            iterations: out.iterations,
            residual: out.relative_residual,
        });
    }
    let x = (&s.x + &out.v * alpha) / (1.0 + alpha);
    let next = ApdDdoState {
        x,
        v: out.v,
        scaling: advance_scaling(s.scaling, alpha, mu)?,
        k: s.k + 1,
    };
    Ok((next, out.iterations))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtraState {
    pub x: Vector,
    /// `(x_{k−1}, ∇f(x_{k−1}))`; `None` before the first step.
    pub prev: Option<(Vector, Vector)>,
    pub k: usize,
}

impl ExtraState {
    pub fn new(x0: Vector) -> Self {
        Self { x: x0, prev: None, k: 0 }
    }
}

fn mix_apply(p: &DdoProblem, m: &crate::linalg::SparseSym, x: &Vector) -> Vector {
    let mut out = Vector::zeros(x.len());
    m.apply_blocks(x.as_slice(), p.block(), out.as_mut_slice());
    out
}

/// `λ_min(Ŵ)/L`, or `μλ_min(Ŵ)/L²` for a strongly convex objective.
pub fn extra_step_size(p: &DdoProblem, mix: &MixingMatrices) -> f64 {
    if p.mu() > 0.0 {
        p.mu() * mix.w_hat_lambda_min / (p.lipschitz() * p.lipschitz())
    } else {
        mix.w_hat_lambda_min / p.lipschitz()
    }
}

pub fn extra_step(s: &ExtraState, p: &DdoProblem, mix: &MixingMatrices, alpha: f64) -> ExtraState {
    let grad = p.gradient(&s.x);
    let mut x = mix_apply(p, &mix.w, &s.x) - &grad * alpha;
    if let Some((x_prev, g_prev)) = &s.prev {
        let correction = &s.x - mix_apply(p, &mix.w_hat, x_prev) + g_prev * alpha;
        x += correction;
    }
    ExtraState {
        x,
        prev: Some((s.x.clone(), grad)),
        k: s.k + 1,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AqpVariant {
    Convex,
    StronglyConvex,
}

/// Counter starts at 1 with `x₀ = x₁`, so the first step has no momentum.
#[derive(Debug, Clone, PartialEq)]
pub struct AqpState {
    pub x: Vector,
    pub prev: Vector,
    pub k: usize,
    /// `θ_{k−1}` of the strongly convex recursion.
    pub theta_prev: f64,
}

impl AqpState {
    pub fn new(x0: Vector) -> Self {
        Self {
            prev: x0.clone(),
            x: x0,
            k: 1,
            theta_prev: 1.0,
        }
    }
}

/// Positive root of `θ² + θ_prev²θ − θ_prev² = 0`.
pub fn aqp_next_theta(theta_prev: f64) -> f64 {
    let t2 = theta_prev * theta_prev;
    0.5 * (-t2 + (t2 * t2 + 4.0 * t2).sqrt())
}

/// Penalty operator `((I − W)/2 ⊗ I_m) y = (Δ/(2λ_max) ⊗ I_m) y`.
fn aqp_penalty(p: &DdoProblem, mix: &MixingMatrices, y: &Vector) -> Vector {
    if mix.lambda_max == 0.0 {
        return Vector::zeros(y.len());
    }
    p.consensus_apply(y) / (2.0 * mix.lambda_max)
}

pub fn aqp_step(s: &AqpState, p: &DdoProblem, mix: &MixingMatrices, variant: AqpVariant) -> AqpState {
    let k = s.k as f64;
    let (mu, lip) = (p.mu(), p.lipschitz());
    let (x, theta_prev) = match variant {
        AqpVariant::Convex => {
            let y = &s.x + (&s.x - &s.prev) * ((k - 1.0) / (k + 1.0));
            let step = p.gradient(&y) + aqp_penalty(p, mix, &y) * (k + 1.0);
            (&y - step / (lip + k + 1.0), s.theta_prev)
        }
        AqpVariant::StronglyConvex => {
            let theta = aqp_next_theta(s.theta_prev);
            let t2 = theta * theta;
            let eta = lip * t2 + mu;
            let c = (eta * theta - mu * t2) * (1.0 - s.theta_prev) / ((eta - mu * t2) * s.theta_prev);
            let y = &s.x + (&s.x - &s.prev) * c;
            let step = p.gradient(&y) * t2 + aqp_penalty(p, mix, &y) * mu;
            (&y - step / eta, theta)
        }
    };
    AqpState {
        prev: s.x.clone(),
        x,
        k: s.k + 1,
        theta_prev,
    }
}
