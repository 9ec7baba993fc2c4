//! The continuous primal-dual flow and its classical Runge-Kutta integration.
//!
//! State `(x, v, λ, θ, γ)` evolves by
//!
//! ```text
//! θλ' = Av − b
//! x'  = v − x
//! γv' = μ_β(x − v) − ∇f_β(x) − Aᵀλ
//! θ'  = −θ,  γ' = μ_β − γ
//! ```
//!
//! and the Lyapunov function
//! `E = L_β(x, λ*) − L_β(x*, λ) + (γ/2)‖v − x*‖² + (θ/2)‖λ − λ*‖²`
//! decays at least like `e^{−t}`. The flow needs `f` differentiable, so it
//! rejects problems with a nonsmooth part or a set constraint.

use crate::error::{check_len, ApdError, Result};
use crate::linalg::Vector;
use crate::model::{lagrangian_gap, ProblemInstance, SaddlePoint};

#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    pub t: f64,
    pub x: Vector,
    pub v: Vector,
    pub lambda: Vector,
    pub theta: f64,
    pub gamma: f64,
}

impl FlowState {
    /// `x = v = x0`, `λ = λ0`, `θ = 1`, `γ = γ0` at `t = 0`.
    pub fn initial(x0: Vector, lambda0: Vector, gamma0: f64) -> Self {
        Self {
            t: 0.0,
            v: x0.clone(),
            x: x0,
            lambda: lambda0,
            theta: 1.0,
            gamma: gamma0,
        }
    }

    fn is_finite(&self) -> bool {
        self.theta.is_finite()
            && self.gamma.is_finite()
            && self.x.iter().chain(self.v.iter()).chain(self.lambda.iter()).all(|v| v.is_finite())
    }
}

/// Time derivative of every component (the `t` field is set to 1).
pub fn flow_rhs(state: &FlowState, p: &ProblemInstance) -> Result<FlowState> {
    if !p.is_smooth() {
        return Err(ApdError::Unsupported(
            "the flow requires a smooth objective on the whole space".into(),
        ));
    }
    check_len("flow x", p.dim(), state.x.len())?;
    check_len("flow v", p.dim(), state.v.len())?;
    check_len("flow λ", p.n_constraints(), state.lambda.len())?;
    let beta = p.effective_beta();
    let mu = p.mu_beta();
    let grad = p.smooth_gradient_beta(&state.x, beta);
    let dv = ((&state.x - &state.v) * mu - grad - p.constraint.apply_adjoint(&state.lambda))
        / state.gamma;
    Ok(FlowState {
        t: 1.0,
        x: &state.v - &state.x,
        v: dv,
        lambda: p.constraint.residual(&state.v) / state.theta,
        theta: -state.theta,
        gamma: mu - state.gamma,
    })
}

fn shifted(s: &FlowState, d: &FlowState, h: f64) -> FlowState {
    FlowState {
        t: s.t + h,
        x: &s.x + &d.x * h,
        v: &s.v + &d.v * h,
        lambda: &s.lambda + &d.lambda * h,
        theta: s.theta + h * d.theta,
        gamma: s.gamma + h * d.gamma,
    }
}

fn rk4_step(s: &FlowState, p: &ProblemInstance, h: f64) -> Result<FlowState> {
    let k1 = flow_rhs(s, p)?;
    let k2 = flow_rhs(&shifted(s, &k1, h / 2.0), p)?;
    let k3 = flow_rhs(&shifted(s, &k2, h / 2.0), p)?;
    let k4 = flow_rhs(&shifted(s, &k3, h), p)?;
    let w = h / 6.0;
    let comb = |a: &Vector, b: &Vector, c: &Vector, d: &Vector| (a + b * 2.0 + c * 2.0 + d) * w;
    Ok(FlowState {
        t: s.t + h,
        x: &s.x + comb(&k1.x, &k2.x, &k3.x, &k4.x),
        v: &s.v + comb(&k1.v, &k2.v, &k3.v, &k4.v),
        lambda: &s.lambda + comb(&k1.lambda, &k2.lambda, &k3.lambda, &k4.lambda),
        theta: s.theta + w * (k1.theta + 2.0 * k2.theta + 2.0 * k3.theta + k4.theta),
        gamma: s.gamma + w * (k1.gamma + 2.0 * k2.gamma + 2.0 * k3.gamma + k4.gamma),
    })
}

/// Largest step accepted by [`integrate_flow`].
pub const MAX_FLOW_STEP: f64 = 0.01;

/// Integrates from `s0` to `s0.t + horizon` with fixed step `h`, returning every state.
///
/// `horizon` must be a whole number of steps.
pub fn integrate_flow(
    p: &ProblemInstance,
    s0: &FlowState,
    h: f64,
    horizon: f64,
) -> Result<Vec<FlowState>> {
    if !(h > 0.0 && h <= MAX_FLOW_STEP) {
        return Err(ApdError::InvalidInput(format!(
            "flow step must lie in (0, {MAX_FLOW_STEP}], got {h}"
        )));
    }
    if !(horizon >= 0.0) || !horizon.is_finite() {
        return Err(ApdError::InvalidInput(format!("horizon must be ≥ 0, got {horizon}")));
    }
    let steps = (horizon / h).round();
    if (steps * h - horizon).abs() > 1e-9 * horizon.max(1.0) {
        return Err(ApdError::InvalidInput(format!(
            "horizon {horizon} is not a multiple of the step {h}"
        )));
    }
    let steps = steps as usize;
    let mut traj = Vec::with_capacity(steps + 1);
    traj.push(s0.clone());
    let t0 = s0.t;
    for i in 1..=steps {
        let prev = traj.last().expect("trajectory is never empty");
        let mut next = rk4_step(prev, p, h)?;
        // Recompute t from the step count to avoid accumulated drift.
        next.t = t0 + i as f64 * h;
        if !next.is_finite() {
            return Err(ApdError::Divergence {
                t: next.t,
                last: Box::new(prev.clone()),
            });
        }
        traj.push(next);
    }
    Ok(traj)
}

/// `E(t)` for a flow state and a saddle point.
pub fn continuous_lyapunov(state: &FlowState, p: &ProblemInstance, saddle: &SaddlePoint) -> f64 {
    let gap = lagrangian_gap(p, &state.x, &state.lambda, saddle, p.effective_beta());
    gap + 0.5 * state.gamma * (&state.v - &saddle.x).norm_squared()
        + 0.5 * state.theta * (&state.lambda - &saddle.lambda).norm_squared()
}

/// One row of a flow trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowRecord {
    pub t: f64,
    pub lyapunov: f64,
    pub feasibility: f64,
    pub theta: f64,
    pub gamma: f64,
}

pub fn flow_records(traj: &[FlowState], p: &ProblemInstance, saddle: &SaddlePoint) -> Vec<FlowRecord> {
    traj.iter()
        .map(|s| FlowRecord {
            t: s.t,
            lyapunov: continuous_lyapunov(s, p, saddle),
            feasibility: p.constraint.residual(&s.x).norm(),
            theta: s.theta,
            gamma: s.gamma,
        })
        .collect()
}
