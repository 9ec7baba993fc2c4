//! Undirected simple graphs, their Laplacians and mixing matrices.

use std::collections::BTreeSet;

use rand::Rng;

use crate::error::{ApdError, Result};
use crate::linalg::{power_iteration, seeded_rng, SparseSym};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    nodes: usize,
    edges: Vec<(usize, usize)>,
}

impl Graph {
    /// Edges are stored as `(min, max)` pairs in sorted order.
    pub fn new(nodes: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if nodes == 0 {
            return Err(ApdError::InvalidInput("graph needs at least one node".into()));
        }
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            if a == b {
                return Err(ApdError::InvalidInput(format!("self-loop at node {a}")));
            }
            if a >= nodes || b >= nodes {
                return Err(ApdError::InvalidInput(format!("edge ({a}, {b}) outside {nodes} nodes")));
            }
            if !set.insert((a.min(b), a.max(b))) {
                return Err(ApdError::InvalidInput(format!("duplicate edge ({a}, {b})")));
            }
        }
        Ok(Self {
            nodes,
            edges: set.into_iter().collect(),
        })
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.nodes];
        for &(a, b) in &self.edges {
            d[a] += 1;
            d[b] += 1;
        }
        d
    }

    fn neighbours(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.nodes];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        for row in &mut adj {
            row.sort_unstable();
        }
        adj
    }

    pub fn is_connected(&self) -> bool {
        let adj = self.neighbours();
        let mut seen = vec![false; self.nodes];
        let mut stack = vec![0];
        seen[0] = true;
        let mut count = 1;
        while let Some(i) = stack.pop() {
            for &j in &adj[i] {
                if !seen[j] {
                    seen[j] = true;
                    count += 1;
                    stack.push(j);
                }
            }
        }
        count == self.nodes
    }

    pub fn path(n: usize) -> Result<Self> {
        Self::new(n, (1..n).map(|i| (i - 1, i)))
    }

    pub fn cycle(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(ApdError::InvalidInput("a cycle needs at least 3 nodes".into()));
        }
        Self::new(n, (0..n).map(|i| (i, (i + 1) % n)))
    }

    pub fn complete(n: usize) -> Result<Self> {
        Self::new(n, (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))))
    }

    /// `rows × cols` lattice, nodes numbered row by row.
    pub fn grid(rows: usize, cols: usize) -> Result<Self> {
        let id = |r: usize, c: usize| r * cols + c;
        let mut edges = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                if c + 1 < cols {
                    edges.push((id(r, c), id(r, c + 1)));
                }
                if r + 1 < rows {
                    edges.push((id(r, c), id(r + 1, c)));
                }
            }
        }
        Self::new(rows * cols, edges)
    }

    /// Points uniform in the unit square joined when closer than `radius`.
    ///
    /// Redraws with the next seed until the graph is connected, up to 1000 times.
    pub fn random_geometric(n: usize, radius: f64, seed: u64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(ApdError::InvalidInput("radius must be positive".into()));
        }
        for attempt in 0..1000u64 {
            let mut rng = seeded_rng(seed.wrapping_add(attempt));
            let pts: Vec<(f64, f64)> = (0..n).map(|_| (rng.random(), rng.random())).collect();
            let mut edges = Vec::new();
            for i in 0..n {
                for j in i + 1..n {
                    let (dx, dy) = (pts[i].0 - pts[j].0, pts[i].1 - pts[j].1);
                    if dx * dx + dy * dy < radius * radius {
                        edges.push((i, j));
                    }
                }
            }
            let g = Self::new(n, edges)?;
            if g.is_connected() {
                return Ok(g);
            }
        }
        Err(ApdError::Disconnected)
    }

    /// Parses `path:n`, `cycle:n`, `complete:n`, `grid:RxC` or `rgg:n:radius:seed`.
    pub fn from_spec(spec: &str) -> Result<Self> {
        let parts: Vec<&str> = spec.split(':').collect();
        let bad = || ApdError::InvalidInput(format!("bad graph spec {spec:?}"));
        let num = |s: &str| s.parse::<usize>().map_err(|_| bad());
        match parts.as_slice() {
            ["path", n] => Self::path(num(n)?),
            ["cycle", n] => Self::cycle(num(n)?),
            ["complete", n] => Self::complete(num(n)?),
            ["grid", dims] => {
                let (r, c) = dims.split_once('x').ok_or_else(bad)?;
                Self::grid(num(r)?, num(c)?)
            }
            ["rgg", n, r, seed] => Self::random_geometric(
                num(n)?,
                r.parse().map_err(|_| bad())?,
                seed.parse().map_err(|_| bad())?,
            ),
            _ => Err(bad()),
        }
    }
}

/// `D − A` of a connected graph; off-diagonal entries are −1 per edge.
pub fn graph_laplacian(g: &Graph) -> Result<SparseSym> {
    if !g.is_connected() {
        return Err(ApdError::Disconnected);
    }
    let adj = g.neighbours();
    let diag = adj.iter().map(|r| r.len() as f64).collect();
    let rows = adj.into_iter().map(|r| r.into_iter().map(|j| (j, -1.0)).collect()).collect();
    Ok(SparseSym::new(diag, rows))
}

/// `λ_max` of a Laplacian by power iteration to relative residual 1e-10.
pub fn laplacian_lambda_max(lap: &SparseSym) -> Result<f64> {
    if lap.dim() == 1 {
        return Ok(0.0);
    }
    match power_iteration(lap.dim(), |x| lap.apply(x), 1e-10, 1_000_000, 0x5eed) {
        Ok((rho, _)) => Ok(rho),
        Err((estimate, iterations)) => Err(ApdError::NormEstimate { estimate, iterations }),
    }
}

/// `W = I − Δ/λ_max(Δ)` and `Ŵ = (I + W)/2`.
#[derive(Debug, Clone)]
pub struct MixingMatrices {
    pub w: SparseSym,
    pub w_hat: SparseSym,
    pub lambda_max: f64,
    /// `λ_min(Ŵ)`: ½ whenever the graph has an edge, since `W` then has eigenvalue 0.
    pub w_hat_lambda_min: f64,
}

pub fn mixing_matrix(g: &Graph) -> Result<MixingMatrices> {
    let lap = graph_laplacian(g)?;
    let lambda_max = laplacian_lambda_max(&lap)?;
    if lambda_max == 0.0 {
        let id = SparseSym::new(vec![1.0; g.nodes()], vec![Vec::new(); g.nodes()]);
        return Ok(MixingMatrices {
            w: id.clone(),
            w_hat: id,
            lambda_max,
            w_hat_lambda_min: 1.0,
        });
    }
    let scale = |f: f64| -> SparseSym {
        let diag = lap.diag().iter().map(|d| f * (1.0 - d / lambda_max) + (1.0 - f)).collect();
        let rows = (0..lap.dim())
            .map(|i| lap.row(i).iter().map(|&(j, a)| (j, -f * a / lambda_max)).collect())
            .collect();
        SparseSym::new(diag, rows)
    };
    Ok(MixingMatrices {
        w: scale(1.0),
        w_hat: scale(0.5),
        lambda_max,
        w_hat_lambda_min: 0.5,
    })
}
