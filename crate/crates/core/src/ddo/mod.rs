//! Decentralized optimization over a graph: consensus-constrained problems,
//! the primal-dual method specialised to them, and the Extra and AQP baselines.

pub mod algorithms;
pub mod graph;
pub mod problem;

use std::time::Instant;

pub use algorithms::{
    apd_ddo_step, aqp_next_theta, aqp_step, extra_step, extra_step_size, ApdDdoConfig, ApdDdoState,
    AqpState, AqpVariant, ExtraState,
};
pub use graph::{graph_laplacian, laplacian_lambda_max, mixing_matrix, Graph, MixingMatrices};
pub use problem::{build_ddo_problem, DdoModel, DdoProblem};

use crate::error::{ApdError, Result};
use crate::linalg::Vector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DdoAlgorithm {
    Apd,
    Extra,
    Aqp,
}

impl DdoAlgorithm {
    pub const ALL: [DdoAlgorithm; 3] = [DdoAlgorithm::Apd, DdoAlgorithm::Extra, DdoAlgorithm::Aqp];

    pub fn name(&self) -> &'static str {
        match self {
            DdoAlgorithm::Apd => "apd",
            DdoAlgorithm::Extra => "extra",
            DdoAlgorithm::Aqp => "aqp",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DdoRecord {
    pub k: usize,
    pub obj_gap: f64,
    pub consensus_residual: f64,
    pub inner_iters: usize,
    pub wall_ns: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DdoRunConfig {
    pub algorithm: DdoAlgorithm,
    pub max_iter: usize,
    /// Initial `γ` of the APD method; defaults to `L`.
    pub gamma0: Option<f64>,
    pub record_time: bool,
    pub apd: ApdDdoConfig,
}

impl DdoRunConfig {
    pub fn new(algorithm: DdoAlgorithm, max_iter: usize) -> Self {
        Self {
            algorithm,
            max_iter,
            gamma0: None,
            record_time: false,
            apd: ApdDdoConfig::default(),
        }
    }
}

/// APD runs stop once `θ` falls below this. The certificate `θ·C` is then far
/// below the resolution of `f`, while forming `s = εz − Ax/α` with `ε ~ θ`
/// injects rounding of relative size `u/ε` into the consensus component of `v`.
pub const DDO_THETA_FLOOR: f64 = 1e-20;

#[derive(Debug, Clone, PartialEq)]
pub enum DdoStatus {
    Completed,
    PrecisionExhausted,
    Failed(String),
}

impl DdoStatus {
    pub fn label(&self) -> &'static str {
        match self {
            DdoStatus::Completed => "completed",
            DdoStatus::PrecisionExhausted => "precision_exhausted",
            DdoStatus::Failed(_) => "failed",
        }
    }
}

#[derive(Debug, Clone)]
pub struct DdoRun {
    pub records: Vec<DdoRecord>,
    pub final_x: Vector,
    pub status: DdoStatus,
}

enum Iterate {
    Apd(ApdDdoState),
    Extra(ExtraState, f64),
    Aqp(AqpState, AqpVariant),
}

impl Iterate {
    fn x(&self) -> &Vector {
        match self {
            Iterate::Apd(s) => &s.x,
            Iterate::Extra(s, _) => &s.x,
            Iterate::Aqp(s, _) => &s.x,
        }
    }
}

/// Runs from `x₀ = 0`; `obj_gap = |f(x_k) − reference|`.
pub fn run_ddo(p: &DdoProblem, cfg: &DdoRunConfig, reference: f64) -> Result<DdoRun> {
    let mix = mixing_matrix(p.graph())?;
    let x0 = Vector::zeros(p.dim());
    let mut it = match cfg.algorithm {
        DdoAlgorithm::Apd => {
            let gamma0 = cfg.gamma0.unwrap_or(p.lipschitz());
            if !(gamma0 > 0.0) {
                return Err(ApdError::InvalidInput("APD needs γ₀ > 0 and L > 0".into()));
            }
            Iterate::Apd(ApdDdoState::new(x0, gamma0))
        }
        DdoAlgorithm::Extra => Iterate::Extra(ExtraState::new(x0), extra_step_size(p, &mix)),
        DdoAlgorithm::Aqp => {
            let variant = if p.mu() > 0.0 { AqpVariant::StronglyConvex } else { AqpVariant::Convex };
            Iterate::Aqp(AqpState::new(x0), variant)
        }
    };
    let row = |k: usize, x: &Vector, inner_iters: usize, wall_ns: u64| DdoRecord {
        k,
        obj_gap: (p.value(x) - reference).abs(),
        consensus_residual: p.consensus_residual(x),
        inner_iters,
        wall_ns,
    };
    let mut records = vec![row(0, it.x(), 0, 0)];
    let mut status = DdoStatus::Completed;
    for k in 1..=cfg.max_iter {
        let start = Instant::now();
        let (next, inner) = match &it {
            Iterate::Apd(s) if s.scaling.theta < DDO_THETA_FLOOR => {
                status = DdoStatus::PrecisionExhausted;
                break;
            }
            Iterate::Apd(s) => match apd_ddo_step(s, p, &cfg.apd) {
                Ok((s, n)) => (Iterate::Apd(s), n),
                Err(e) => {
                    status = DdoStatus::Failed(e.to_string());
                    break;
                }
            },
            Iterate::Extra(s, a) => (Iterate::Extra(extra_step(s, p, &mix, *a), *a), 0),
            Iterate::Aqp(s, v) => (Iterate::Aqp(aqp_step(s, p, &mix, *v), *v), 0),
        };
        let wall = if cfg.record_time { start.elapsed().as_nanos() as u64 } else { 0 };
        it = next;
        records.push(row(k, it.x(), inner, wall));
    }
    Ok(DdoRun {
        records,
        final_x: it.x().clone(),
        status,
    })
}

/// First iteration from which the objective gap stays at or below `tol`.
pub fn reach_iteration(records: &[DdoRecord], tol: f64) -> Option<usize> {
    let last_bad = records.iter().rposition(|r| !(r.obj_gap <= tol));
    match last_bad {
        None => records.first().map(|r| r.k),
        Some(i) => records.get(i + 1).map(|r| r.k),
    }
}
