//! Preconditioned conjugate gradients for symmetric positive (semi)definite systems.
//!
//! The loop follows the classic two-term recurrence and, every 50 iterations,
//! replaces the recurred residual by the true residual `e − Hd` so that
//! rounding drift cannot stall convergence.

use crate::error::{check_len, ApdError, Result};
use crate::linalg::Vector;

#[derive(Debug, Clone)]
pub struct PcgOutcome {
    pub solution: Vector,
    pub iterations: usize,
    pub converged: bool,
    /// Final `δ = ⟨r, M⁻¹r⟩`.
    pub delta: f64,
}

const RESIDUAL_REFRESH: usize = 50;

/// Core loop. `stop(iter, d, r, δ, δ₀)` decides convergence after each update.
pub(crate) fn pcg_loop<H, M, S>(
    h: H,
    e: &Vector,
    precond: M,
    d0: &Vector,
    i_max: usize,
    mut stop: S,
) -> Result<PcgOutcome>
where
    H: Fn(&Vector) -> Vector,
    M: Fn(&Vector) -> Vector,
    S: FnMut(&Vector, &Vector, f64, f64) -> bool,
{
    check_len("PCG initial guess", e.len(), d0.len())?;
    let mut d = d0.clone();
    let mut r = e - h(&d);
    let mut p = precond(&r);
    let mut delta = r.dot(&p);
    let delta0 = delta;
    if delta <= 0.0 || stop(&d, &r, delta, delta0) {
        return Ok(PcgOutcome {
            solution: d,
            iterations: 0,
            converged: true,
            delta,
        });
    }
    let mut i = 0;
    while i < i_max {
        let q = h(&p);
        let curv = q.dot(&p);
        if !(curv > 0.0) {
            return Err(ApdError::InvalidInput(format!(
                "PCG operator is not positive definite along a search direction (curvature {curv:e})"
            )));
        }
        let a = delta / curv;
        d.axpy(a, &p, 1.0);
        i += 1;
        if i % RESIDUAL_REFRESH == 0 {
            r = e - h(&d);
        } else {
            r.axpy(-a, &q, 1.0);
        }
        let w = precond(&r);
        let delta_new = r.dot(&w);
        if delta_new <= 0.0 || stop(&d, &r, delta_new, delta0) {
            return Ok(PcgOutcome {
                solution: d,
                iterations: i,
                converged: true,
                delta: delta_new.max(0.0),
            });
        }
        let beta = delta_new / delta;
        p = w + p * beta;
        delta = delta_new;
    }
    Ok(PcgOutcome {
        solution: d,
        iterations: i,
        converged: false,
        delta,
    })
}

/// Solves `Hd = e` until `δ ≤ ε²δ₀` or `i_max` iterations.
///
/// `precond` applies `M⁻¹`. A non-converged run is reported through
/// [`PcgOutcome::converged`] with the last iterate.
pub fn pcg_solve<H, M>(
    h: H,
    e: &Vector,
    precond: M,
    d0: &Vector,
    eps: f64,
    i_max: usize,
) -> Result<PcgOutcome>
where
    H: Fn(&Vector) -> Vector,
    M: Fn(&Vector) -> Vector,
{
    if !(eps > 0.0 && eps < 1.0) {
        return Err(ApdError::InvalidInput(format!("PCG tolerance must lie in (0,1), got {eps}")));
    }
    let eps2 = eps * eps;
    pcg_loop(h, e, precond, d0, i_max, |_, _, delta, delta0| delta <= eps2 * delta0)
}
