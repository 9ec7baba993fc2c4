//! Dense aliases plus a small symmetric sparse matrix used for graph operators.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

/// Deterministic generator used everywhere a seed is accepted.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_vector(rng: &mut ChaCha8Rng, n: usize) -> Vector {
    Vector::from_fn(n, |_, _| StandardNormal.sample(rng))
}

pub fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    // Row-major fill so that the sample stream matches a row-by-row reading.
    let mut m = Matrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            m[(i, j)] = StandardNormal.sample(rng);
        }
    }
    m
}

/// Symmetric matrix stored as a diagonal plus per-row off-diagonal entries.
///
/// Rows list every off-diagonal neighbour, so each edge appears twice.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSym {
    diag: Vec<f64>,
    rows: Vec<Vec<(usize, f64)>>,
    row_sums: Vec<f64>,
}

impl SparseSym {
    pub fn new(diag: Vec<f64>, rows: Vec<Vec<(usize, f64)>>) -> Self {
        debug_assert_eq!(diag.len(), rows.len());
        let row_sums = diag
            .iter()
            .zip(&rows)
            .map(|(d, r)| d + r.iter().map(|&(_, w)| w).sum::<f64>())
            .collect();
        Self { diag, rows, row_sums }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    /// `out = self * x` where `x` holds `block` contiguous coordinates per row.
    ///
    /// Rows are evaluated as `sᵢxᵢ + Σⱼ wᵢⱼ(xⱼ − xᵢ)` with `sᵢ` the row sum, so a
    /// Laplacian maps constant vectors to exactly zero.
    pub fn apply_blocks(&self, x: &[f64], block: usize, out: &mut [f64]) {
        for i in 0..self.dim() {
            let sum = self.row_sums[i];
            let dst = &mut out[i * block..(i + 1) * block];
            for c in 0..block {
                dst[c] = sum * x[i * block + c];
            }
            for &(j, w) in &self.rows[i] {
                for c in 0..block {
                    dst[c] += w * (x[j * block + c] - x[i * block + c]);
                }
            }
        }
    }

    pub fn apply(&self, x: &Vector) -> Vector {
        let mut out = Vector::zeros(x.len());
        self.apply_blocks(x.as_slice(), 1, out.as_mut_slice());
        out
    }

    pub fn to_dense(&self) -> Matrix {
        let n = self.dim();
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = self.diag[i];
            for &(j, w) in &self.rows[i] {
                m[(i, j)] += w;
            }
        }
        m
    }
}

/// Largest eigenvalue of a symmetric positive semidefinite operator by power iteration.
///
/// Stops once the eigen-residual `‖Mu − ρu‖` falls below `tol·ρ`.
pub(crate) fn power_iteration<F>(
    dim: usize,
    apply: F,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> std::result::Result<(f64, usize), (f64, usize)>
where
    F: Fn(&Vector) -> Vector,
{
    let mut rng = seeded_rng(seed);
    let mut u = gaussian_vector(&mut rng, dim);
    let n0 = u.norm();
    if n0 == 0.0 {
        return Ok((0.0, 0));
    }
    u /= n0;
    let mut rho = 0.0;
    for it in 1..=max_iter {
        let mu = apply(&u);
        rho = u.dot(&mu);
        let nm = mu.norm();
        if nm == 0.0 {
            return Ok((0.0, it));
        }
        let resid = (&mu - &u * rho).norm();
        if resid <= tol * rho.abs() {
            return Ok((rho, it));
        }
        u = mu / nm;
    }
    Err((rho, max_iter))
}
