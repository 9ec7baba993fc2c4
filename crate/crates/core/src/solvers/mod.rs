//! The four discrete schemes and the run loop.

pub mod lyapunov;
pub mod steps;
pub mod subproblem;

use std::time::Instant;

use crate::error::{ApdError, Result};
use crate::inner::SsnConfig;
use crate::linalg::Vector;
use crate::model::{kkt_residual, ProblemInstance, SaddlePoint};
use crate::schedule::{BoundParams, ScalingState, StepRule};

pub use lyapunov::{discrete_lyapunov, residual_metrics, Certificate, ResidualMetrics, GAP_TOLERANCE};
pub use steps::{ex_apdfb_step, implicit_apd_step, semi_apd_step, semi_apdfb_step, StepOutput, Stepper};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Implicit,
    SemiApd,
    SemiApdfb,
    ExApdfb,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Implicit, Scheme::SemiApd, Scheme::SemiApdfb, Scheme::ExApdfb];

    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Implicit => "implicit",
            Scheme::SemiApd => "semi_apd",
            Scheme::SemiApdfb => "semi_apdfb",
            Scheme::ExApdfb => "ex_apdfb",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|sc| sc.name() == s)
    }

    /// Augmentation weight the scheme actually uses.
    pub fn beta(&self, p: &ProblemInstance) -> f64 {
        match self {
            Scheme::Implicit => 0.0,
            _ => p.effective_beta(),
        }
    }

    pub fn mu_beta(&self, p: &ProblemInstance) -> f64 {
        match self {
            Scheme::Implicit => 0.0,
            _ => p.mu_beta(),
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Inner solver settings and the tolerance schedule `min(base, θ·factor)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerConfig {
    pub ssn: SsnConfig,
    pub pcg_max_iter: usize,
    pub base_tol: f64,
    pub theta_factor: f64,
}

impl Default for InnerConfig {
    fn default() -> Self {
        Self {
            ssn: SsnConfig::default(),
            pcg_max_iter: 10_000,
            base_tol: 1e-10,
            theta_factor: 1e-6,
        }
    }
}

impl InnerConfig {
    pub fn tolerance(&self, theta: f64) -> f64 {
        self.base_tol.min(theta * self.theta_factor)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub scheme: Scheme,
    pub gamma0: f64,
    /// Overrides the problem's `β` when set.
    pub beta: Option<f64>,
    pub max_iter: usize,
    /// Stop once `obj_gap + feasibility` (or the KKT residual without a reference) falls to this; 0 disables.
    pub stop_tol: f64,
    /// Step size of the implicit scheme.
    pub alpha: f64,
    pub inner: InnerConfig,
    /// Record wall-clock time per step; off gives byte-identical output across runs.
    pub record_time: bool,
}

impl SolverConfig {
    pub fn new(scheme: Scheme, gamma0: f64, max_iter: usize) -> Self {
        Self {
            scheme,
            gamma0,
            beta: None,
            max_iter,
            stop_tol: 0.0,
            alpha: 1.0,
            inner: InnerConfig::default(),
            record_time: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterateState {
    pub x: Vector,
    pub v: Vector,
    pub lambda: Vector,
    /// Extrapolation point of the last step; `None` at the start.
    pub y: Option<Vector>,
    pub scaling: ScalingState,
    pub k: usize,
}

impl IterateState {
    pub fn new(x: Vector, v: Vector, lambda: Vector, gamma0: f64) -> Self {
        Self {
            x,
            v,
            lambda,
            y: None,
            scaling: ScalingState::new(gamma0),
            k: 0,
        }
    }

    /// `x₀ = v₀ = proj_X(0)`, `λ₀ = 0`.
    pub fn initial(p: &ProblemInstance, gamma0: f64) -> Result<Self> {
        let x0 = p.initial_point()?;
        Ok(Self::new(x0.clone(), x0, Vector::zeros(p.n_constraints()), gamma0))
    }

    /// `λ − θ⁻¹(Ax − b)`, constant along every run.
    pub fn invariant(&self, p: &ProblemInstance) -> Vector {
        &self.lambda - p.constraint.residual(&self.x) / self.scaling.theta
    }
}

/// One row of a run. Reference-dependent fields are NaN without a reference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub k: usize,
    /// Step that produced this iterate; 0 for the initial state.
    pub alpha: f64,
    pub theta: f64,
    pub gamma: f64,
    pub obj_gap: f64,
    pub feasibility: f64,
    pub lagrangian_gap: f64,
    pub lyapunov: f64,
    pub inner_iters: usize,
    pub wall_ns: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunStatus {
    Converged,
    MaxIter,
    ScaleExhausted,
    Failed(String),
}

impl RunStatus {
    pub fn label(&self) -> &'static str {
        match self {
            RunStatus::Converged => "converged",
            RunStatus::MaxIter => "max_iter",
            RunStatus::ScaleExhausted => "scale_exhausted",
            RunStatus::Failed(_) => "failed",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolverRun {
    pub scheme: Scheme,
    pub records: Vec<IterationRecord>,
    pub status: RunStatus,
    pub final_state: IterateState,
    pub rule: StepRule,
    pub bounds: BoundParams,
    /// Present when a reference saddle was supplied.
    pub certificate: Option<Certificate>,
    /// `β` the scheme ran with.
    pub beta: f64,
}

fn record(
    s: &IterateState,
    p: &ProblemInstance,
    saddle: Option<&SaddlePoint>,
    beta: f64,
    alpha: f64,
    inner_iters: usize,
    wall_ns: u64,
) -> Result<(IterationRecord, f64)> {
    let (obj_gap, feasibility, lagrangian_gap, lyapunov, stop_measure) = match saddle {
        Some(sp) => {
            let m = residual_metrics(s, p, sp, beta)?;
            let e = discrete_lyapunov(s, p, sp, beta);
            (m.obj_gap, m.feasibility, m.lagrangian_gap, e, m.obj_gap + m.feasibility)
        }
        None => {
            let (stat, feas) = kkt_residual(p, &s.x, &s.lambda)?;
            (f64::NAN, feas, f64::NAN, f64::NAN, stat + feas)
        }
    };
    Ok((
        IterationRecord {
            k: s.k,
            alpha,
            theta: s.scaling.theta,
            gamma: s.scaling.gamma,
            obj_gap,
            feasibility,
            lagrangian_gap,
            lyapunov,
            inner_iters,
            wall_ns,
        },
        stop_measure,
    ))
}

/// Runs from the default start. See [`run_solver_from`].
pub fn run_solver(p: &ProblemInstance, cfg: &SolverConfig, saddle: Option<&SaddlePoint>) -> Result<SolverRun> {
    let p = match cfg.beta {
        Some(b) => p.clone().with_beta(b)?,
        None => p.clone(),
    };
    let s0 = IterateState::initial(&p, cfg.gamma0)?;
    run_solver_from(&p, cfg, saddle, s0)
}

/// Iterates until the stopping test, `max_iter`, or `θ < 10⁻³⁰⁰`.
///
/// Configuration errors are returned; failures during the run end it with
/// [`RunStatus::Failed`] and keep the records gathered so far.
pub fn run_solver_from(
    p: &ProblemInstance,
    cfg: &SolverConfig,
    saddle: Option<&SaddlePoint>,
    s0: IterateState,
) -> Result<SolverRun> {
    if !(cfg.gamma0 > 0.0) || !cfg.gamma0.is_finite() {
        return Err(ApdError::InvalidInput(format!("γ₀ must be positive, got {}", cfg.gamma0)));
    }
    if !(cfg.stop_tol >= 0.0) {
        return Err(ApdError::InvalidInput("stop_tol must be ≥ 0".into()));
    }
    let stepper = Stepper::new(p, cfg.scheme, cfg.inner)?.with_invariant(&s0);
    let beta = stepper.beta();
    let rule = stepper.rule(cfg.alpha);
    let bounds = BoundParams {
        gamma0: cfg.gamma0,
        mu_beta: stepper.mu_beta(),
    };
    let certificate = saddle.map(|sp| Certificate::from_initial(&s0, p, sp, beta));
    let stopped = |m: f64| cfg.stop_tol > 0.0 && m <= cfg.stop_tol;

    let mut s = s0;
    let mut records = Vec::with_capacity(cfg.max_iter.min(1 << 20) + 1);
    let (r0, m0) = record(&s, p, saddle, beta, 0.0, 0, 0)?;
    records.push(r0);
    let mut status = if stopped(m0) { RunStatus::Converged } else { RunStatus::MaxIter };
    if status == RunStatus::MaxIter {
        for _ in 0..cfg.max_iter {
            if s.scaling.is_exhausted() {
                status = RunStatus::ScaleExhausted;
                break;
            }
            let step = stepper.step_size(&s, cfg.alpha).and_then(|alpha| {
                let start = Instant::now();
                let out = stepper.step(&s, alpha)?;
                let wall = if cfg.record_time { start.elapsed().as_nanos() as u64 } else { 0 };
                let (rec, m) = record(&out.state, p, saddle, beta, alpha, out.inner_iters, wall)?;
                Ok((out.state, rec, m))
            });
            match step {
                Ok((next, rec, m)) => {
                    s = next;
                    records.push(rec);
                    if stopped(m) {
                        status = RunStatus::Converged;
                        break;
                    }
                }
                Err(e) => {
                    status = RunStatus::Failed(e.to_string());
                    break;
                }
            }
        }
        if status == RunStatus::MaxIter && s.scaling.is_exhausted() {
            status = RunStatus::ScaleExhausted;
        }
    }
    Ok(SolverRun {
        scheme: cfg.scheme,
        records,
        status,
        final_state: s,
        rule,
        bounds,
        certificate,
        beta,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::linalg::Matrix;
    use crate::model::{solve_reference_saddle, DiagonalQuadratic, LinearConstraint};

    fn qp1() -> ProblemInstance {
        let c = LinearConstraint::dense(Matrix::from_row_slice(1, 2, &[1.0, 1.0]), Vector::from_element(1, 1.0)).unwrap();
        ProblemInstance::smooth_only(Arc::new(DiagonalQuadratic::isotropic(2, 1.0)), c).unwrap()
    }

    #[test]
    fn zero_budget_records_only_the_start() {
        let p = qp1();
        let sp = solve_reference_saddle(&p).unwrap();
        let run = run_solver(&p, &SolverConfig::new(Scheme::Implicit, 1.0, 0), Some(&sp)).unwrap();
        assert_eq!(run.records.len(), 1);
        let r = run.records[0];
        assert_eq!((r.k, r.alpha, r.inner_iters), (0, 0.0, 0));
        assert!((r.obj_gap - 0.25).abs() < 1e-15);
        assert!((r.feasibility - 1.0).abs() < 1e-15);
        assert!((r.lagrangian_gap - 0.25).abs() < 1e-15);
        assert!((r.lyapunov - 0.625).abs() < 1e-15);
        assert_eq!(run.status, RunStatus::MaxIter);
    }

    #[test]
    fn implicit_run_meets_feasibility_certificate() {
        let p = qp1();
        let sp = solve_reference_saddle(&p).unwrap();
        let run = run_solver(&p, &SolverConfig::new(Scheme::Implicit, 1.0, 30), Some(&sp)).unwrap();
        assert_eq!(run.records.len(), 31);
        let r0 = (2.0 * 0.625f64).sqrt() + 0.5 + 1.0;
        assert!((run.certificate.unwrap().r0 - r0).abs() < 1e-14);
        assert!(run.records[1].lyapunov <= 0.3125);
        assert!(run.records[30].feasibility <= 2f64.powi(-30) * r0);
    }

    #[test]
    fn tolerance_tie_reports_convergence() {
        let p = qp1();
        let sp = solve_reference_saddle(&p).unwrap();
        let probe = run_solver(&p, &SolverConfig::new(Scheme::Implicit, 1.0, 5), Some(&sp)).unwrap();
        let last = probe.records[5];
        let mut cfg = SolverConfig::new(Scheme::Implicit, 1.0, 5);
        cfg.stop_tol = last.obj_gap + last.feasibility;
        let run = run_solver(&p, &cfg, Some(&sp)).unwrap();
        assert_eq!(run.status, RunStatus::Converged);
        assert_eq!(run.records.len(), 6);
    }

    #[test]
    fn without_reference_the_gaps_are_nan() {
        let p = qp1();
        let run = run_solver(&p, &SolverConfig::new(Scheme::ExApdfb, 1.0, 3), None).unwrap();
        assert!(run.records.iter().all(|r| r.obj_gap.is_nan() && r.lyapunov.is_nan()));
        assert!(run.records.iter().all(|r| r.feasibility.is_finite()));
    }

    #[test]
    fn scheme_names_round_trip() {
        for s in Scheme::ALL {
            assert_eq!(Scheme::parse(s.name()), Some(s));
        }
        assert_eq!(Scheme::parse("explicit"), None);
    }
}
