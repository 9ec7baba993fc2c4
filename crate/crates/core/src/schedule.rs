//! Scaling recursion `θ, γ` and the step-size rules of each scheme.

use crate::error::{ApdError, Result};

/// Below this `θ` a run reports that the scaling is exhausted.
pub const THETA_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingState {
    pub theta: f64,
    pub gamma: f64,
}

impl ScalingState {
    pub fn new(gamma0: f64) -> Self {
        Self {
            theta: 1.0,
            gamma: gamma0,
        }
    }

    pub fn is_exhausted(&self) -> bool {
        self.theta < THETA_FLOOR
    }
}

/// `θ' = θ/(1+α)`, `γ' = (γ + μ_β α)/(1+α)`.
pub fn advance_scaling(s: ScalingState, alpha: f64, mu_beta: f64) -> Result<ScalingState> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(ApdError::InvalidInput(format!("step size must be positive, got {alpha}")));
    }
    Ok(ScalingState {
        theta: s.theta / (1.0 + alpha),
        gamma: (s.gamma + mu_beta * alpha) / (1.0 + alpha),
    })
}

/// How each scheme picks `α_k` from the current scaling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepRule {
    /// `α = √(θγ)/‖A‖`.
    SemiApd { op_norm: f64 },
    /// `α = √(γ/L_β)`.
    SemiApdfb { l_beta: f64 },
    /// `α = √(θγ/(L_β + ‖A‖²))`.
    ExApdfb { l_beta: f64, op_norm: f64 },
    /// Caller-chosen constant step.
    Free { alpha: f64 },
}

pub fn step_size(rule: StepRule, s: ScalingState) -> Result<f64> {
    let alpha = match rule {
        StepRule::SemiApd { op_norm } => {
            if !(op_norm > 0.0) {
                return Err(ApdError::InvalidInput(
                    "semi-implicit step needs a nonzero constraint operator".into(),
                ));
            }
            (s.theta * s.gamma).sqrt() / op_norm
        }
        StepRule::SemiApdfb { l_beta } => {
            if !(l_beta > 0.0) {
                return Err(ApdError::InvalidInput(
                    "forward-backward step needs a positive smoothness constant".into(),
                ));
            }
            (s.gamma / l_beta).sqrt()
        }
        StepRule::ExApdfb { l_beta, op_norm } => {
            let sb = l_beta + op_norm * op_norm;
            if !(sb > 0.0) {
                return Err(ApdError::InvalidInput(
                    "explicit step needs L_β + ‖A‖² > 0".into(),
                ));
            }
            (s.theta * s.gamma / sb).sqrt()
        }
        StepRule::Free { alpha } => alpha,
    };
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(ApdError::InvalidInput(format!("step size {alpha} is not positive")));
    }
    Ok(alpha)
}

/// Constants entering the `θ_k` bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundParams {
    pub gamma0: f64,
    pub mu_beta: f64,
}

impl BoundParams {
    pub fn gamma_min(&self) -> f64 {
        self.gamma0.min(self.mu_beta)
    }

    pub fn gamma_max(&self) -> f64 {
        self.gamma0.max(self.mu_beta)
    }
}

fn sublinear_pair(q: f64, k: f64, p: BoundParams) -> f64 {
    let a = q / (p.gamma0.sqrt() * k + q);
    let b = q * q / ((p.gamma_min().sqrt() * k + q).powi(2));
    a.min(b)
}

/// Closed-form upper bound on `θ_k`, in the form stated for each scheme.
///
/// For the forward-backward rule the sublinear term `4L/(√γ₀k + 2√L)²` is
/// optimistic for small `k`; [`theta_certificate`] is the version that provably
/// dominates the realized sequence.
pub fn theta_upper_bound(rule: StepRule, k: usize, p: BoundParams) -> f64 {
    let kf = k as f64;
    match rule {
        StepRule::SemiApd { op_norm } => {
            sublinear_pair(3.0 * op_norm + p.gamma_max().sqrt(), kf, p)
        }
        StepRule::ExApdfb { l_beta, op_norm } => {
            let s = (l_beta + op_norm * op_norm).sqrt();
            sublinear_pair(3.0 * s + p.gamma_max().sqrt(), kf, p)
        }
        StepRule::SemiApdfb { l_beta } => {
            let sub = 4.0 * l_beta / (p.gamma0.sqrt() * kf + 2.0 * l_beta.sqrt()).powi(2);
            sub.min(linear_term(l_beta, kf, p))
        }
        StepRule::Free { alpha } => (1.0 + alpha).powf(-kf),
    }
}

fn linear_term(l_beta: f64, k: f64, p: BoundParams) -> f64 {
    (1.0 + (p.gamma_min() / l_beta).sqrt()).powf(-k)
}

/// Rigorous upper bound on `θ_k`.
///
/// Identical to [`theta_upper_bound`] except for the forward-backward rule,
/// where the per-step growth of `1/√θ` is at least
/// `c = √(γ₀/L)/(1 + √(1 + √(γ₀/L)))`, giving `θ_k ≤ (1 + ck)⁻²`.
pub fn theta_certificate(rule: StepRule, k: usize, p: BoundParams) -> f64 {
    match rule {
        StepRule::SemiApdfb { l_beta } => {
            let kf = k as f64;
            let r = (p.gamma0 / l_beta).sqrt();
            let c = r / (1.0 + (1.0 + r).sqrt());
            (1.0 + c * kf).powi(-2).min(linear_term(l_beta, kf, p))
        }
        _ => theta_upper_bound(rule, k, p),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scaling_recursion_example() {
        let s = advance_scaling(ScalingState { theta: 0.5, gamma: 1.0 }, 0.5, 0.25).unwrap();
        assert!((s.theta - 1.0 / 3.0).abs() < 1e-15);
        assert!((s.gamma - 0.75).abs() < 1e-15);
        assert!(advance_scaling(s, 0.0, 1.0).is_err());
    }

    #[test]
    fn step_size_examples() {
        let s = ScalingState::new(1.0);
        let a = step_size(StepRule::SemiApd { op_norm: 2f64.sqrt() }, s).unwrap();
        assert!((a - 0.5f64.sqrt()).abs() < 1e-15);
        let a = step_size(StepRule::ExApdfb { l_beta: 1.0, op_norm: 2f64.sqrt() }, s).unwrap();
        assert!((a - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        assert!(step_size(StepRule::SemiApd { op_norm: 0.0 }, s).is_err());
    }

    #[test]
    fn theta_bound_examples() {
        let p = BoundParams { gamma0: 1.0, mu_beta: 1.0 };
        let b = theta_upper_bound(StepRule::SemiApdfb { l_beta: 1.0 }, 1, p);
        assert!((b - 4.0 / 9.0).abs() < 1e-15);
        let p = BoundParams { gamma0: 1.0, mu_beta: 0.0 };
        let b = theta_upper_bound(StepRule::SemiApd { op_norm: 1.0 }, 3, p);
        assert!((b - 4.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn stated_forward_backward_bound_is_optimistic_at_first_step() {
        // γ₀ = μ = L = 1 gives α ≡ 1, so θ₁ = 1/2 > 4/9.
        let p = BoundParams { gamma0: 1.0, mu_beta: 1.0 };
        let rule = StepRule::SemiApdfb { l_beta: 1.0 };
        let s = advance_scaling(ScalingState::new(1.0), 1.0, 1.0).unwrap();
        assert!(s.theta > theta_upper_bound(rule, 1, p));
        assert!(s.theta <= theta_certificate(rule, 1, p) * (1.0 + 1e-12));
    }
}
