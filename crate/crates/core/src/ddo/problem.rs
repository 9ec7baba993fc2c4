//! `min (1/n) Σᵢ fᵢ(x(i))` subject to consensus across the nodes of a graph.

use std::sync::Arc;

use nalgebra::Cholesky;
use rand::Rng;

use super::graph::{graph_laplacian, Graph};
use crate::error::{check_len, ApdError, Result};
use crate::linalg::{gaussian_matrix, gaussian_vector, seeded_rng, Matrix, SparseSym, Vector};
use crate::model::{LeastSquares, Logistic, SmoothOracle};

/// Local data model of each node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DdoModel {
    /// `½‖Bᵢx − bᵢ‖²` with `samples` rows per node.
    LeastSquares { samples: usize },
    /// `ln(1 + exp(−bᵢθᵢᵀx)) + (δ/2)‖x‖²` with one sample per node.
    Logistic { ridge: f64 },
}

/// Node-major layout: block `i` holds coordinates `i·m .. (i+1)·m`.
#[derive(Debug, Clone)]
pub struct DdoProblem {
    graph: Graph,
    laplacian: SparseSym,
    block: usize,
    locals: Vec<Arc<dyn SmoothOracle>>,
    mu: f64,
    lip: f64,
}

impl DdoProblem {
    pub fn new(graph: Graph, block: usize, locals: Vec<Arc<dyn SmoothOracle>>) -> Result<Self> {
        check_len("local objectives", graph.nodes(), locals.len())?;
        for f in &locals {
            check_len("local dimension", block, f.dim())?;
        }
        let laplacian = graph_laplacian(&graph)?;
        let n = graph.nodes() as f64;
        let mu = locals.iter().map(|f| f.strong_convexity()).fold(f64::INFINITY, f64::min) / n;
        let lip = locals.iter().map(|f| f.lipschitz()).fold(0.0, f64::max) / n;
        Ok(Self {
            graph,
            laplacian,
            block,
            locals,
            mu,
            lip,
        })
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn laplacian(&self) -> &SparseSym {
        &self.laplacian
    }

    pub fn nodes(&self) -> usize {
        self.graph.nodes()
    }

    pub fn block(&self) -> usize {
        self.block
    }

    pub fn dim(&self) -> usize {
        self.nodes() * self.block
    }

    pub fn locals(&self) -> &[Arc<dyn SmoothOracle>] {
        &self.locals
    }

    /// `min μᵢ / n`.
    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// `max Lᵢ / n`.
    pub fn lipschitz(&self) -> f64 {
        self.lip
    }

    fn node_block(&self, x: &Vector, i: usize) -> Vector {
        x.rows(i * self.block, self.block).into_owned()
    }

    pub fn value(&self, x: &Vector) -> f64 {
        let sum: f64 = (0..self.nodes()).map(|i| self.locals[i].value(&self.node_block(x, i))).sum();
        sum / self.nodes() as f64
    }

    pub fn gradient(&self, x: &Vector) -> Vector {
        let n = self.nodes() as f64;
        let mut g = Vector::zeros(self.dim());
        for i in 0..self.nodes() {
            let gi = self.locals[i].gradient(&self.node_block(x, i)) / n;
            g.rows_mut(i * self.block, self.block).copy_from(&gi);
        }
        g
    }

    /// `(Δ ⊗ I_m) x`.
    pub fn consensus_apply(&self, x: &Vector) -> Vector {
        let mut out = Vector::zeros(x.len());
        self.laplacian.apply_blocks(x.as_slice(), self.block, out.as_mut_slice());
        out
    }

    /// `‖(Δ ⊗ I_m) x‖`.
    pub fn consensus_residual(&self, x: &Vector) -> f64 {
        self.consensus_apply(x).norm()
    }

    /// Subtracts the node average from each coordinate, i.e. projects onto `range(Δ ⊗ I_m)`.
    pub fn remove_consensus_component(&self, x: &Vector) -> Vector {
        let n = self.nodes() as f64;
        let mut mean = Vector::zeros(self.block);
        for i in 0..self.nodes() {
            mean += x.rows(i * self.block, self.block);
        }
        mean /= n;
        Vector::from_fn(x.len(), |k, _| x[k] - mean[k % self.block])
    }

    /// `1 ⊗ w`.
    pub fn replicate(&self, w: &Vector) -> Vector {
        Vector::from_fn(self.dim(), |k, _| w[k % self.block])
    }

    /// `(1/n) Σᵢ fᵢ(w)`.
    pub fn average_objective(&self, w: &Vector) -> f64 {
        self.locals.iter().map(|f| f.value(w)).sum::<f64>() / self.nodes() as f64
    }

    fn average_gradient(&self, w: &Vector) -> Vector {
        let mut g = Vector::zeros(self.block);
        for f in &self.locals {
            g += f.gradient(w);
        }
        g / self.nodes() as f64
    }

    /// Minimizer and optimal value of the averaged objective over a common point.
    ///
    /// Quadratic locals are solved through the normal equations; otherwise
    /// Nesterov's method runs until the gradient norm is at rounding level.
    pub fn centralized_minimizer(&self) -> Result<(Vector, f64)> {
        let quads: Option<Vec<(Matrix, Vector)>> = self.locals.iter().map(|f| f.quadratic()).collect();
        let w = match quads {
            Some(q) => {
                let mut h = Matrix::zeros(self.block, self.block);
                let mut c = Vector::zeros(self.block);
                for (hi, ci) in q {
                    h += hi;
                    c += ci;
                }
                Cholesky::new(h)
                    .ok_or_else(|| ApdError::NoReference("averaged objective is not strictly convex".into()))?
                    .solve(&(-c))
            }
            None => self.accelerated_gradient()?,
        };
        let f = self.average_objective(&w);
        Ok((w, f))
    }

    fn accelerated_gradient(&self) -> Result<Vector> {
        let mu = self.locals.iter().map(|f| f.strong_convexity()).fold(f64::INFINITY, f64::min);
        let lip = self.locals.iter().map(|f| f.lipschitz()).fold(0.0, f64::max);
        if !(mu > 0.0) {
            return Err(ApdError::NoReference("non-quadratic locals need strong convexity".into()));
        }
        let q = (lip / mu).sqrt();
        let momentum = (q - 1.0) / (q + 1.0);
        let mut x = Vector::zeros(self.block);
        let mut prev = x.clone();
        let g0 = self.average_gradient(&x).norm().max(1.0);
        const MAX_ITER: usize = 1_000_000;
        for _ in 0..MAX_ITER {
            let y = &x + (&x - &prev) * momentum;
            let next = &y - self.average_gradient(&y) / lip;
            prev = std::mem::replace(&mut x, next);
            if self.average_gradient(&x).norm() <= 1e-14 * g0 {
                return Ok(x);
            }
        }
        Err(ApdError::NotConverged {
            what: "centralized reference solve",
            iterations: MAX_ITER,
            residual: self.average_gradient(&x).norm(),
        })
    }
}

/// Random instance: least-squares designs are Gaussian scaled by `1/√m`;
/// logistic features are Gaussian scaled by `2/√m` with fair random labels.
pub fn build_ddo_problem(g: &Graph, block: usize, model: DdoModel, seed: u64) -> Result<DdoProblem> {
    if block == 0 {
        return Err(ApdError::InvalidInput("block size must be positive".into()));
    }
    let mut rng = seeded_rng(seed);
    let scale = (block as f64).sqrt();
    let mut locals: Vec<Arc<dyn SmoothOracle>> = Vec::with_capacity(g.nodes());
    for _ in 0..g.nodes() {
        match model {
            DdoModel::LeastSquares { samples } => {
                let b = gaussian_matrix(&mut rng, samples, block) / scale;
                let t = gaussian_vector(&mut rng, samples);
                locals.push(Arc::new(LeastSquares::new(b, t)?));
            }
            DdoModel::Logistic { ridge } => {
                let theta = gaussian_matrix(&mut rng, 1, block) * (2.0 / scale);
                let label = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                locals.push(Arc::new(Logistic::new(theta, Vector::from_element(1, label), ridge)?));
            }
        }
    }
    DdoProblem::new(g.clone(), block, locals)
}
