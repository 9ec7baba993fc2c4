//! Experiment harness: configuration, batch runs, CSV output, rate fits and audits.

pub mod audit;
pub mod config;
pub mod csv_io;
pub mod experiment;
pub mod fit;
pub mod robustness;

pub use audit::{audit_records, AuditContext, AuditReport};
pub use config::{ExperimentConfig, ProblemSource};
pub use csv_io::{
    read_solve_csv, write_ddo_csv, write_flow_csv, write_robustness_csv, write_solve_csv, RobustnessRow,
};
pub use experiment::{load_problem, run_experiment, ExperimentReport, SchemeSummary};
pub use fit::{fit_points, fit_rate, FitMode, RateFit};
pub use robustness::{default_eps_list, run_robustness, RobustnessConfig, RobustnessMethod};
