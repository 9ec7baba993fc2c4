//! Iteration counts of the consensus solvers across a range of shifts `ε`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::ddo::{graph_laplacian, Graph};
use crate::error::{ApdError, Result};
use crate::harness::csv_io::RobustnessRow;
use crate::inner::{augmented_consensus_solve, plain_stationary_solve, ConsensusMethod, ConsensusOperator};
use crate::linalg::Vector;

/// Solver applied to either the bordered system or the original one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RobustnessMethod {
    pub method: ConsensusMethod,
    /// Run on `(εI + A)v = s` directly instead of the bordered system.
    pub plain: bool,
}

impl RobustnessMethod {
    /// `pcg_jacobi`, `gs`, ... for the bordered system; `plain_jacobi`, `plain_gs`, `plain_sgs` otherwise.
    pub fn parse(s: &str) -> Option<Self> {
        match s.strip_prefix("plain_") {
            Some(rest) => {
                let method = ConsensusMethod::parse(rest)?;
                matches!(
                    method,
                    ConsensusMethod::Jacobi | ConsensusMethod::GaussSeidel | ConsensusMethod::SymmetricGaussSeidel
                )
                .then_some(Self { method, plain: true })
            }
            None => ConsensusMethod::parse(s).map(|method| Self { method, plain: false }),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RobustnessConfig {
    pub graph: Graph,
    pub eps: Vec<f64>,
    pub methods: Vec<RobustnessMethod>,
    pub tol: f64,
    pub max_iter: usize,
    /// Seed of the Gaussian right-hand side.
    pub seed: u64,
}

impl RobustnessConfig {
    pub fn new(graph: Graph, eps: Vec<f64>, methods: Vec<RobustnessMethod>) -> Self {
        Self {
            graph,
            eps,
            methods,
            tol: 1e-8,
            max_iter: 100_000,
            seed: 0,
        }
    }
}

/// `ε = 10⁻¹, …, 10⁻⁹`.
pub fn default_eps_list() -> Vec<f64> {
    (1..=9).map(|e| 10f64.powi(-e)).collect()
}

pub fn robustness_rhs(nodes: usize, seed: u64) -> Vector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Vector::from_fn(nodes, |_, _| StandardNormal.sample(&mut rng))
}

/// One row per `(ε, method)`, in list order; iteration caps are reported, not raised.
pub fn run_robustness(cfg: &RobustnessConfig) -> Result<Vec<RobustnessRow>> {
    if cfg.eps.iter().any(|e| !(*e > 0.0)) {
        return Err(ApdError::InvalidInput("every ε must be positive".into()));
    }
    let lap = graph_laplacian(&cfg.graph)?;
    let op = ConsensusOperator::new(&lap, 1);
    let s = robustness_rhs(cfg.graph.nodes(), cfg.seed);
    let mut rows = Vec::with_capacity(cfg.eps.len() * cfg.methods.len());
    for &eps in &cfg.eps {
        for m in &cfg.methods {
            let out = if m.plain {
                plain_stationary_solve(&op, eps, &s, m.method, cfg.tol, cfg.max_iter)?
            } else {
                augmented_consensus_solve(&op, eps, &s, m.method, cfg.tol, cfg.max_iter, None)?
            };
            rows.push(RobustnessRow {
                eps,
                method: m.method.name().to_string(),
                system: if m.plain { "plain" } else { "augmented" }.to_string(),
                iterations: out.iterations,
                converged: out.converged,
                relative_residual: out.relative_residual,
            });
        }
    }
    Ok(rows)
}
