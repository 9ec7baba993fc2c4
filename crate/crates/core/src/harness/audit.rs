//! Offline checks of the Lyapunov contraction and the a-priori certificates.

use crate::schedule::{theta_certificate, BoundParams, StepRule};
use crate::solvers::{Certificate, IterationRecord, SolverRun};

/// Relative slack for the contraction and certificate checks.
pub const AUDIT_REL_TOL: f64 = 1e-9;
/// Relative slack for the `θ` bound, which involves no iterate data.
pub const THETA_REL_TOL: f64 = 1e-12;

/// Step rule, bound constants and (optionally) the certificate of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuditContext {
    pub rule: StepRule,
    pub bounds: BoundParams,
    pub certificate: Option<Certificate>,
}

impl AuditContext {
    pub fn from_run(run: &SolverRun) -> Self {
        Self {
            rule: run.rule,
            bounds: run.bounds,
            certificate: run.certificate,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AuditReport {
    /// Number of transitions examined.
    pub checked: usize,
    pub contraction: usize,
    /// Transitions with `θ₊(1+α) ≠ θ` beyond rounding.
    pub theta_recursion: usize,
    pub feasibility: usize,
    pub objective: usize,
    pub theta_bound: usize,
    /// Description of the first violation found.
    pub first_violation: Option<String>,
}

impl AuditReport {
    pub fn total(&self) -> usize {
        self.contraction + self.theta_recursion + self.feasibility + self.objective + self.theta_bound
    }

    fn flag(&mut self, what: &str, k: usize, lhs: f64, rhs: f64) {
        if self.first_violation.is_none() {
            self.first_violation = Some(format!("{what} at k = {k}: {lhs:e} > {rhs:e}"));
        }
    }
}

/// Absolute rounding floor for the contraction and certificate checks.
///
/// `E` contains the difference of two Lagrangian values whose size is that of
/// `E₀` and the objective; once `E` is tiny their rounding error dominates.
fn rounding_floor(e0: f64) -> f64 {
    64.0 * f64::EPSILON * e0.abs().max(1.0)
}

/// Checks every record against the contraction `E₊ ≤ E/(1+α)` and the
/// recursion `θ₊ = θ/(1+α)` and, when a context is given, the `θ` bound and the feasibility and objective certificates.
///
/// Checks needing reference data are skipped on NaN fields.
pub fn audit_records(records: &[IterationRecord], ctx: Option<&AuditContext>) -> AuditReport {
    let mut rep = AuditReport::default();
    let e0 = records.first().map_or(f64::NAN, |r| r.lyapunov);
    let floor = rounding_floor(e0);
    for (i, r) in records.iter().enumerate() {
        if i > 0 {
            rep.checked += 1;
            let prev = records[i - 1];
            if prev.lyapunov.is_finite() && r.lyapunov.is_finite() {
                let bound = prev.lyapunov / (1.0 + r.alpha) * (1.0 + AUDIT_REL_TOL) + floor;
                if r.lyapunov > bound {
                    rep.contraction += 1;
                    rep.flag("contraction", r.k, r.lyapunov, bound);
                }
            }
            let carried = r.theta * (1.0 + r.alpha);
            if (carried - prev.theta).abs() > THETA_REL_TOL * prev.theta {
                rep.theta_recursion += 1;
                rep.flag("theta recursion", r.k, carried, prev.theta);
            }
        }
        let Some(ctx) = ctx else { continue };
        let tb = theta_certificate(ctx.rule, r.k, ctx.bounds) * (1.0 + THETA_REL_TOL);
        if r.theta > tb {
            rep.theta_bound += 1;
            rep.flag("theta bound", r.k, r.theta, tb);
        }
        if let Some(c) = ctx.certificate {
            let fb = c.feasibility_bound(r.theta) * (1.0 + AUDIT_REL_TOL) + floor;
            if r.feasibility > fb {
                rep.feasibility += 1;
                rep.flag("feasibility certificate", r.k, r.feasibility, fb);
            }
            if r.obj_gap.is_finite() {
                let ob = c.objective_bound(r.theta) * (1.0 + AUDIT_REL_TOL) + floor;
                if r.obj_gap > ob {
                    rep.objective += 1;
                    rep.flag("objective certificate", r.k, r.obj_gap, ob);
                }
            }
        }
    }
    rep
}
