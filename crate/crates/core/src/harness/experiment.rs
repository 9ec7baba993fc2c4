//! Batch runs of several schemes on one problem, with CSV output and a summary.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use crate::error::Result;
use crate::harness::audit::{audit_records, AuditContext, AuditReport};
use crate::harness::config::{ExperimentConfig, ProblemSource};
use crate::harness::csv_io::{fmt_real, write_solve_csv, write_table};
use crate::harness::fit::{fit_rate, FitMode, RateFit};
use crate::model::file::read_problem;
use crate::model::{planted_instance, solve_reference_saddle, PlantedSpec, ProblemInstance, SaddlePoint};
use crate::schedule::StepRule;
use crate::solvers::{run_solver, RunStatus, Scheme, SolverConfig, SolverRun};

pub const SUMMARY_HEADER: [&str; 16] = [
    "scheme",
    "status",
    "iterations",
    "final_obj_gap",
    "final_feasibility",
    "final_theta",
    "fit_mode",
    "rate_slope",
    "rate_r2",
    "contraction_violations",
    "theta_recursion_violations",
    "feasibility_violations",
    "objective_violations",
    "theta_violations",
    "seed",
    "error",
];

/// Outcome of one scheme within an experiment.
#[derive(Debug, Clone)]
pub struct SchemeSummary {
    pub scheme: Scheme,
    /// `None` when the run could not be set up at all.
    pub status: Option<RunStatus>,
    pub iterations: usize,
    pub final_obj_gap: f64,
    pub final_feasibility: f64,
    pub final_theta: f64,
    pub fit_mode: FitMode,
    pub fit: Option<RateFit>,
    pub audit: AuditReport,
    pub csv: Option<PathBuf>,
    pub error: Option<String>,
}

impl SchemeSummary {
    pub fn failed(&self) -> bool {
        self.error.is_some() || matches!(self.status, Some(RunStatus::Failed(_)) | None)
    }

    fn row(&self, seed: u64) -> Vec<String> {
        let (slope, r2) = self.fit.map_or((f64::NAN, f64::NAN), |f| (f.slope, f.r_squared));
        let mode = match self.fit_mode {
            FitMode::PowerLaw => "power",
            FitMode::Linear => "linear",
        };
        vec![
            self.scheme.name().to_string(),
            self.status.as_ref().map_or("error", RunStatus::label).to_string(),
            self.iterations.to_string(),
            fmt_real(self.final_obj_gap),
            fmt_real(self.final_feasibility),
            fmt_real(self.final_theta),
            mode.to_string(),
            fmt_real(slope),
            fmt_real(r2),
            self.audit.contraction.to_string(),
            self.audit.theta_recursion.to_string(),
            self.audit.feasibility.to_string(),
            self.audit.objective.to_string(),
            self.audit.theta_bound.to_string(),
            seed.to_string(),
            self.error.clone().unwrap_or_default(),
        ]
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub summaries: Vec<SchemeSummary>,
    pub summary_path: PathBuf,
}

impl ExperimentReport {
    /// True when at least one scheme ran and every one of them failed.
    pub fn all_failed(&self) -> bool {
        !self.summaries.is_empty() && self.summaries.iter().all(SchemeSummary::failed)
    }

    pub fn total_violations(&self) -> usize {
        self.summaries.iter().map(|s| s.audit.total()).sum()
    }
}

/// Loads or generates the problem named by the config, with a reference saddle if one is known.
pub fn load_problem(cfg: &ExperimentConfig) -> Result<(ProblemInstance, Option<SaddlePoint>)> {
    match &cfg.problem {
        ProblemSource::File(path) => {
            let file = read_problem(path)?;
            let reference = match file.reference {
                Some(r) => Some(r),
                None => solve_reference_saddle(&file.problem).ok(),
            };
            Ok((file.problem, reference))
        }
        &ProblemSource::Planted { n, m, mu, l1, seed } => {
            let mut spec = PlantedSpec::quadratic(n, m, mu, seed);
            if l1 > 0.0 {
                spec.l1_weight = Some(l1);
            }
            let (p, saddle) = planted_instance(&spec)?;
            Ok((p, Some(saddle)))
        }
    }
}

/// Linear fits for rules whose `θ` decays geometrically, power laws otherwise.
pub fn default_fit_mode(run: &SolverRun) -> FitMode {
    match run.rule {
        StepRule::Free { .. } => FitMode::Linear,
        StepRule::SemiApdfb { .. } if run.bounds.mu_beta > 0.0 => FitMode::Linear,
        _ => FitMode::PowerLaw,
    }
}

/// Output path of one scheme's records.
pub fn scheme_csv_path(cfg: &ExperimentConfig, scheme: Scheme) -> PathBuf {
    cfg.output_dir.join(format!("{}_{}.csv", cfg.name, scheme.name()))
}

fn run_one(cfg: &ExperimentConfig, p: &ProblemInstance, saddle: Option<&SaddlePoint>, scheme: Scheme) -> SchemeSummary {
    let mut sc = SolverConfig::new(scheme, cfg.gamma0, cfg.max_iter);
    sc.beta = cfg.beta;
    sc.stop_tol = cfg.stop_tol;
    sc.alpha = cfg.alpha;
    sc.record_time = cfg.timing;
    let mut out = SchemeSummary {
        scheme,
        status: None,
        iterations: 0,
        final_obj_gap: f64::NAN,
        final_feasibility: f64::NAN,
        final_theta: f64::NAN,
        fit_mode: cfg.fit_mode.unwrap_or(FitMode::PowerLaw),
        fit: None,
        audit: AuditReport::default(),
        csv: None,
        error: None,
    };
    let run = match run_solver(p, &sc, saddle) {
        Ok(r) => r,
        Err(e) => {
            out.error = Some(e.to_string());
            return out;
        }
    };
    if let Some(last) = run.records.last() {
        out.iterations = last.k;
        out.final_obj_gap = last.obj_gap;
        out.final_feasibility = last.feasibility;
        out.final_theta = last.theta;
    }
    out.fit_mode = cfg.fit_mode.unwrap_or_else(|| default_fit_mode(&run));
    out.fit = fit_rate(&run.records, cfg.fit_window, out.fit_mode).ok();
    out.audit = audit_records(&run.records, Some(&AuditContext::from_run(&run)));
    let path = scheme_csv_path(cfg, scheme);
    match write_solve_csv(&path, &run.records) {
        Ok(()) => out.csv = Some(path),
        Err(e) => out.error = Some(e.to_string()),
    }
    if let RunStatus::Failed(msg) = &run.status {
        out.error.get_or_insert_with(|| msg.clone());
    }
    out.status = Some(run.status);
    out
}

/// Runs every scheme of `cfg` (up to `cfg.jobs` at a time) and writes
/// `<name>_<scheme>.csv` plus `summary.csv` under the output directory.
///
/// Per-scheme failures are recorded in the summary; only a failure to load the
/// problem or to write the summary is returned as an error.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let summary_path = cfg.output_dir.join("summary.csv");
    let slots: Vec<Mutex<Option<SchemeSummary>>> = cfg.schemes.iter().map(|_| Mutex::new(None)).collect();
    if !cfg.schemes.is_empty() {
        let (p, saddle) = load_problem(cfg)?;
        let next = AtomicUsize::new(0);
        std::thread::scope(|scope| {
            for _ in 0..cfg.jobs.min(cfg.schemes.len()) {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    let Some(&scheme) = cfg.schemes.get(i) else { break };
                    let s = run_one(cfg, &p, saddle.as_ref(), scheme);
                    *slots[i].lock().unwrap() = Some(s);
                });
            }
        });
    }
    let summaries: Vec<SchemeSummary> = slots
        .into_iter()
        .map(|m| m.into_inner().unwrap().expect("every scheme ran"))
        .collect();
    write_table(&summary_path, &SUMMARY_HEADER, summaries.iter().map(|s| s.row(cfg.seed)))?;
    Ok(ExperimentReport { summaries, summary_path })
}

/// Convenience for tests and the CLI: reads the config file and runs it.
pub fn run_experiment_file(path: &Path) -> Result<ExperimentReport> {
    run_experiment(&ExperimentConfig::read(path)?)
}
