//! Semismooth Newton on `F_k(λ) = 0` with a backtracking line search on the merit `𝓕_k`.

use crate::error::{check_len, ApdError, Result};
use crate::inner::dual_map::{eval_fk_scaled, eval_merit, DualMapContext};
use crate::inner::pcg::pcg_solve;
use crate::linalg::Vector;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsnConfig {
    /// Armijo constant `ν ∈ (0, ½)`.
    pub nu: f64,
    /// Backtracking factor `δ ∈ (0, 1)`.
    pub shrink: f64,
    pub tol: f64,
    pub max_newton: usize,
    /// Relative tolerance for the inner CG solve of each Newton system.
    pub pcg_eps: f64,
}

impl Default for SsnConfig {
    fn default() -> Self {
        Self {
            nu: 1e-4,
            shrink: 0.5,
            tol: 1e-10,
            max_newton: 50,
            pcg_eps: 1e-12,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SsnOutcome {
    pub lambda: Vector,
    pub iterations: usize,
    pub converged: bool,
    pub residual_norm: f64,
    /// `‖F_k‖` at every Newton iterate, starting from `λ0`.
    pub residual_history: Vec<f64>,
    pub pcg_iterations: usize,
}

const MAX_HALVINGS: usize = 60;

pub fn ssn_solve(ctx: &DualMapContext<'_>, lambda0: &Vector, cfg: &SsnConfig) -> Result<SsnOutcome> {
    check_len("SsN start", ctx.constraint.rows(), lambda0.len())?;
    if !(cfg.nu > 0.0 && cfg.nu < 0.5) || !(cfg.shrink > 0.0 && cfg.shrink < 1.0) {
        return Err(ApdError::InvalidInput("SsN needs ν ∈ (0,½) and δ ∈ (0,1)".into()));
    }
    let m = lambda0.len();
    let mut lambda = lambda0.clone();
    let mut history = Vec::new();
    let mut pcg_total = 0;
    for iter in 0..=cfg.max_newton {
        let (f, scale) = eval_fk_scaled(ctx, &lambda)?;
        let fnorm = f.norm();
        history.push(fnorm);
        // Below this the residual is dominated by rounding in its summands.
        let floor = 1e-14 * scale;
        if fnorm <= cfg.tol.max(floor) {
            return Ok(SsnOutcome {
                lambda,
                iterations: iter,
                converged: true,
                residual_norm: fnorm,
                residual_history: history,
                pcg_iterations: pcg_total,
            });
        }
        if iter == cfg.max_newton {
            return Ok(SsnOutcome {
                lambda,
                iterations: iter,
                converged: false,
                residual_norm: fnorm,
                residual_history: history,
                pcg_iterations: pcg_total,
            });
        }
        let s = ctx.jacobian_diag(&lambda)?;
        let diag = ctx.newton_diagonal(&s);
        let rhs = -&f;
        let out = pcg_solve(
            |d| ctx.newton_apply(&s, d),
            &rhs,
            |x| match &diag {
                Some(dg) => x.component_div(dg),
                None => x.clone(),
            },
            &Vector::zeros(m),
            cfg.pcg_eps,
            10 * m + 100,
        )?;
        pcg_total += out.iterations;
        let d = out.solution;

        let merit0 = eval_merit(ctx, &lambda)?;
        let slope = f.dot(&d);
        let slack = 1e-14 * (1.0 + merit0.abs());
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..=MAX_HALVINGS {
            let trial = &lambda + &d * step;
            if eval_merit(ctx, &trial)? <= merit0 + cfg.nu * step * slope + slack {
                lambda = trial;
                accepted = true;
                break;
            }
            step *= cfg.shrink;
        }
        if !accepted {
            return Err(ApdError::LineSearch {
                halvings: MAX_HALVINGS,
            });
        }
    }
    unreachable!("loop returns on its last iteration")
}
