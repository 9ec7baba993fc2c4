use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use apd_core::ddo::{build_ddo_problem, run_ddo, DdoAlgorithm, DdoModel, DdoRunConfig, Graph};
use apd_core::flow::{flow_records, integrate_flow, FlowState};
use apd_core::harness::{
    audit_records, default_eps_list, read_solve_csv, run_experiment, run_robustness, write_ddo_csv,
    write_flow_csv, write_robustness_csv, write_solve_csv, AuditContext, AuditReport, ExperimentConfig,
    RobustnessConfig, RobustnessMethod,
};
use apd_core::model::file::read_problem;
use apd_core::model::solve_reference_saddle;
use apd_core::schedule::BoundParams;
use apd_core::solvers::{run_solver, Certificate, InnerConfig, Stepper};
use apd_core::{IterateState, ProblemInstance, SaddlePoint, Scheme, SolverConfig};

#[derive(Parser)]
#[command(name = "apd", version, about = "Accelerated primal-dual solvers and benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one discrete scheme on a problem file.
    Solve(SolveArgs),
    /// Integrate the continuous flow with RK4.
    Flow(FlowArgs),
    /// Decentralized optimization on a generated graph.
    Ddo(DdoArgs),
    /// Inner consensus solvers across a list of ε.
    Robustness(RobustnessArgs),
    /// Run every scheme named by an experiment config.
    Compare(CompareArgs),
    /// Re-check a solve CSV offline.
    Audit(AuditArgs),
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    problem: PathBuf,
    #[arg(long, value_parser = parse_scheme)]
    scheme: Scheme,
    #[arg(long, default_value_t = 1.0)]
    gamma0: f64,
    /// Overrides the β given in the problem file.
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long, default_value_t = 200)]
    max_iter: usize,
    /// Stop once obj_gap + feasibility falls to this; 0 runs all iterations.
    #[arg(long, default_value_t = 0.0)]
    stop_tol: f64,
    /// Step size of the implicit scheme.
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// Record wall-clock time per step.
    #[arg(long)]
    timing: bool,
    #[arg(long)]
    csv: PathBuf,
}

#[derive(Args)]
struct FlowArgs {
    #[arg(long)]
    problem: PathBuf,
    #[arg(long)]
    h: f64,
    #[arg(long = "T")]
    horizon: f64,
    #[arg(long, default_value_t = 1.0)]
    gamma0: f64,
    #[arg(long)]
    csv: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Ls,
    Logistic,
}

#[derive(Args)]
struct DdoArgs {
    /// `path:n`, `cycle:n`, `complete:n`, `grid:RxC` or `rgg:n:radius:seed`.
    #[arg(long)]
    graph: String,
    /// Block size per node.
    #[arg(long)]
    m: usize,
    #[arg(long, value_enum)]
    model: ModelArg,
    #[arg(long, value_parser = parse_ddo_algo)]
    algo: DdoAlgorithm,
    #[arg(long, default_value_t = 1000)]
    max_iter: usize,
    /// Rows per node of the least-squares model.
    #[arg(long, default_value_t = 5)]
    samples: usize,
    /// Ridge weight of the logistic model.
    #[arg(long, default_value_t = 0.5)]
    ridge: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    timing: bool,
    #[arg(long)]
    csv: PathBuf,
}

#[derive(Args)]
struct RobustnessArgs {
    #[arg(long)]
    graph: String,
    /// Comma-separated ε values; defaults to 1e-1 through 1e-9.
    #[arg(long, value_delimiter = ',')]
    eps_list: Option<Vec<f64>>,
    /// Comma-separated methods such as `pcg_jacobi,plain_jacobi`.
    #[arg(long, value_delimiter = ',', value_parser = parse_method, required = true)]
    methods: Vec<RobustnessMethod>,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 100_000)]
    max_iter: usize,
    /// Seed of the random right-hand side.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    csv: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    config: PathBuf,
    /// Overrides `jobs` in the config.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct AuditArgs {
    csv: PathBuf,
    /// Problem the CSV came from; enables the θ bound and certificate checks.
    #[arg(long, requires = "scheme")]
    problem: Option<PathBuf>,
    #[arg(long, value_parser = parse_scheme)]
    scheme: Option<Scheme>,
    #[arg(long, default_value_t = 1.0)]
    gamma0: f64,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
}

fn parse_scheme(s: &str) -> Result<Scheme, String> {
    Scheme::parse(s).ok_or_else(|| format!("unknown scheme {s:?}"))
}

fn parse_ddo_algo(s: &str) -> Result<DdoAlgorithm, String> {
    DdoAlgorithm::parse(s).ok_or_else(|| format!("unknown algorithm {s:?}"))
}

fn parse_method(s: &str) -> Result<RobustnessMethod, String> {
    RobustnessMethod::parse(s).ok_or_else(|| format!("unknown method {s:?}"))
}

fn load(path: &Path, beta: Option<f64>) -> Result<(ProblemInstance, Option<SaddlePoint>)> {
    let file = read_problem(path).with_context(|| format!("reading {}", path.display()))?;
    let problem = match beta {
        Some(b) => file.problem.with_beta(b)?,
        None => file.problem,
    };
    let reference = match file.reference {
        Some(r) => Some(r),
        None => solve_reference_saddle(&problem).ok(),
    };
    Ok((problem, reference))
}

fn solve(a: SolveArgs) -> Result<ExitCode> {
    let (p, reference) = load(&a.problem, a.beta)?;
    let mut cfg = SolverConfig::new(a.scheme, a.gamma0, a.max_iter);
    cfg.stop_tol = a.stop_tol;
    cfg.alpha = a.alpha;
    cfg.record_time = a.timing;
    let run = run_solver(&p, &cfg, reference.as_ref())?;
    write_solve_csv(&a.csv, &run.records)?;
    let last = run.records.last().expect("a run has its initial record");
    let audit = audit_records(&run.records, Some(&AuditContext::from_run(&run)));
    println!(
        "{}: {} after {} iterations, obj_gap {:e}, feasibility {:e}, theta {:e}, {} violations",
        run.scheme,
        run.status.label(),
        last.k,
        last.obj_gap,
        last.feasibility,
        last.theta,
        audit.total()
    );
    if let apd_core::solvers::RunStatus::Failed(msg) = &run.status {
        eprintln!("run failed: {msg}");
        return Ok(ExitCode::FAILURE);
    }
    Ok(ExitCode::SUCCESS)
}

fn flow(a: FlowArgs) -> Result<ExitCode> {
    let (p, reference) = load(&a.problem, None)?;
    let saddle = reference.context("flow needs a reference saddle point and none could be computed")?;
    let s0 = FlowState::initial(p.initial_point()?, apd_core::Vector::zeros(p.n_constraints()), a.gamma0);
    let traj = integrate_flow(&p, &s0, a.h, a.horizon)?;
    let records = flow_records(&traj, &p, &saddle);
    write_flow_csv(&a.csv, &records)?;
    let (first, last) = (records[0], records[records.len() - 1]);
    println!("E({}) / E(0) = {:e}", last.t, last.lyapunov / first.lyapunov);
    Ok(ExitCode::SUCCESS)
}

fn ddo(a: DdoArgs) -> Result<ExitCode> {
    let graph = Graph::from_spec(&a.graph)?;
    let model = match a.model {
        ModelArg::Ls => DdoModel::LeastSquares { samples: a.samples },
        ModelArg::Logistic => DdoModel::Logistic { ridge: a.ridge },
    };
    let p = build_ddo_problem(&graph, a.m, model, a.seed)?;
    let (_, reference) = p.centralized_minimizer()?;
    let mut cfg = DdoRunConfig::new(a.algo, a.max_iter);
    cfg.record_time = a.timing;
    let run = run_ddo(&p, &cfg, reference)?;
    write_ddo_csv(&a.csv, &run.records)?;
    let last = run.records.last().expect("a run has its initial record");
    println!(
        "{}: {} after {} iterations, obj_gap {:e}, consensus residual {:e}",
        a.algo.name(),
        run.status.label(),
        last.k,
        last.obj_gap,
        last.consensus_residual
    );
    Ok(ExitCode::SUCCESS)
}

fn robustness(a: RobustnessArgs) -> Result<ExitCode> {
    let graph = Graph::from_spec(&a.graph)?;
    let mut cfg = RobustnessConfig::new(graph, a.eps_list.unwrap_or_else(default_eps_list), a.methods);
    cfg.tol = a.tol;
    cfg.max_iter = a.max_iter;
    cfg.seed = a.seed;
    let rows = run_robustness(&cfg)?;
    write_robustness_csv(&a.csv, &rows)?;
    for r in &rows {
        println!(
            "eps {:e} {} ({}): {} iterations{}",
            r.eps,
            r.method,
            r.system,
            r.iterations,
            if r.converged { "" } else { ", not converged" }
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn compare(a: CompareArgs) -> Result<ExitCode> {
    let mut cfg = ExperimentConfig::read(&a.config)?;
    if let Some(j) = a.jobs {
        cfg.jobs = j;
    }
    let report = run_experiment(&cfg)?;
    for s in &report.summaries {
        let status = s.status.as_ref().map_or("error", |st| st.label());
        println!("{}: {status}, {} iterations, {} violations", s.scheme, s.iterations, s.audit.total());
        if let Some(e) = &s.error {
            eprintln!("{}: {e}", s.scheme);
        }
    }
    println!("summary written to {}", report.summary_path.display());
    Ok(if report.all_failed() { ExitCode::FAILURE } else { ExitCode::SUCCESS })
}

fn audit_context(a: &AuditArgs) -> Result<Option<AuditContext>> {
    let (Some(path), Some(scheme)) = (&a.problem, a.scheme) else {
        return Ok(None);
    };
    let (p, reference) = load(path, a.beta)?;
    let stepper = Stepper::new(&p, scheme, InnerConfig::default())?;
    let s0 = IterateState::initial(&p, a.gamma0)?;
    let certificate = reference.map(|sp| Certificate::from_initial(&s0, &p, &sp, stepper.beta()));
    Ok(Some(AuditContext {
        rule: stepper.rule(a.alpha),
        bounds: BoundParams {
            gamma0: a.gamma0,
            mu_beta: stepper.mu_beta(),
        },
        certificate,
    }))
}

fn print_audit(rep: &AuditReport) {
    println!(
        "{} transitions: contraction {}, theta recursion {}, theta bound {}, feasibility {}, objective {}",
        rep.checked, rep.contraction, rep.theta_recursion, rep.theta_bound, rep.feasibility, rep.objective
    );
    if let Some(v) = &rep.first_violation {
        println!("first violation: {v}");
    }
}

fn audit(a: AuditArgs) -> Result<ExitCode> {
    let records = read_solve_csv(&a.csv).with_context(|| format!("reading {}", a.csv.display()))?;
    if records.is_empty() {
        bail!("{} has no records", a.csv.display());
    }
    let ctx = audit_context(&a)?;
    let rep = audit_records(&records, ctx.as_ref());
    print_audit(&rep);
    Ok(if rep.total() == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn main() -> Result<ExitCode> {
    match Cli::parse().command {
        Command::Solve(a) => solve(a),
        Command::Flow(a) => flow(a),
        Command::Ddo(a) => ddo(a),
        Command::Robustness(a) => robustness(a),
        Command::Compare(a) => compare(a),
        Command::Audit(a) => audit(a),
    }
}
