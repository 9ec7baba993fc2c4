//! Robust solvers for `(εI + A)v = s` where `A = Δ ⊗ I_m` is a graph Laplacian
//! acting on node-major blocks of length `m`.
//!
//! The kernel of `A` is spanned by the constant vectors `1 ⊗ e_c`, which makes
//! classical iterations degrade like `1/ε`. Bordering the system with one extra
//! unknown per coordinate,
//!
//! ```text
//! [ εn·I_m        ε(1ᵀ ⊗ I_m) ] [ h ]   [ Σᵢ s(i) ]
//! [ ε(1 ⊗ I_m)    εI + A      ] [ w ] = [ s       ]
//! ```
//!
//! gives a singular but consistent system whose every solution recovers
//! `v = 1 ⊗ h + w`. Relaxation on the extra row corrects the kernel component
//! directly, so Gauss-Seidel sweeps and Krylov methods on the bordered matrix
//! converge at a rate independent of `ε`. With `m = 1` the leading block is the
//! scalar `εq`.
//!
//! Every method stops on the relative residual of the original system.

use crate::error::{check_len, ApdError, Result};
use crate::inner::pcg::pcg_loop;
use crate::linalg::{SparseSym, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConsensusMethod {
    Jacobi,
    GaussSeidel,
    SymmetricGaussSeidel,
    PcgJacobi,
    PcgSgs,
}

impl ConsensusMethod {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Jacobi => "jacobi",
            Self::GaussSeidel => "gs",
            Self::SymmetricGaussSeidel => "sgs",
            Self::PcgJacobi => "pcg_jacobi",
            Self::PcgSgs => "pcg_sgs",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "jacobi" => Self::Jacobi,
            "gs" => Self::GaussSeidel,
            "sgs" => Self::SymmetricGaussSeidel,
            "pcg_jacobi" | "pcg-jacobi" => Self::PcgJacobi,
            "pcg_sgs" | "pcg-sgs" => Self::PcgSgs,
            _ => return None,
        })
    }
}

/// `A = Δ ⊗ I_block` with `Δ` stored as a symmetric sparse matrix.
#[derive(Debug, Clone, Copy)]
pub struct ConsensusOperator<'a> {
    pub laplacian: &'a SparseSym,
    pub block: usize,
}

impl<'a> ConsensusOperator<'a> {
    pub fn new(laplacian: &'a SparseSym, block: usize) -> Self {
        Self { laplacian, block }
    }

    pub fn nodes(&self) -> usize {
        self.laplacian.dim()
    }

    pub fn dim(&self) -> usize {
        self.nodes() * self.block
    }

    pub fn apply(&self, x: &Vector) -> Vector {
        let mut out = Vector::zeros(x.len());
        self.laplacian
            .apply_blocks(x.as_slice(), self.block, out.as_mut_slice());
        out
    }

    /// `(εI + A)x − s`.
    pub fn shifted_residual(&self, eps: f64, x: &Vector, s: &Vector) -> Vector {
        self.apply(x) + x * eps - s
    }

    /// Sum of node blocks, one entry per coordinate.
    fn block_sum(&self, x: &[f64]) -> Vector {
        let mut out = Vector::zeros(self.block);
        for i in 0..self.nodes() {
            for c in 0..self.block {
                out[c] += x[i * self.block + c];
            }
        }
        out
    }
}

/// Unknowns of the bordered system: the kernel block `head` and the node part `tail`.
#[derive(Debug, Clone, PartialEq)]
pub struct BorderedState {
    pub head: Vector,
    pub tail: Vector,
}

impl BorderedState {
    pub fn zeros(op: &ConsensusOperator<'_>) -> Self {
        Self {
            head: Vector::zeros(op.block),
            tail: Vector::zeros(op.dim()),
        }
    }

    /// `v = 1 ⊗ head + tail`.
    pub fn recover(&self, block: usize) -> Vector {
        Vector::from_fn(self.tail.len(), |k, _| self.tail[k] + self.head[k % block])
    }

    /// `(εI + A)(1 ⊗ head + tail) − s` without forming the sum.
    ///
    /// `A` annihilates the head exactly, and applying it to the recovered `v`
    /// would cost `u·‖A‖·|head|` of accuracy once `head ~ 1/ε` dominates.
    pub fn shifted_residual(&self, op: &ConsensusOperator<'_>, eps: f64, s: &Vector) -> Vector {
        let mut r = op.shifted_residual(eps, &self.tail, s);
        for k in 0..r.len() {
            r[k] += eps * self.head[k % op.block];
        }
        r
    }

    /// Moves the mean of each tail coordinate into the head, leaving `v` unchanged.
    fn center(&mut self, block: usize) {
        let n = self.tail.len() / block;
        for c in 0..block {
            let mean = (0..n).map(|i| self.tail[i * block + c]).sum::<f64>() / n as f64;
            self.head[c] += mean;
            for i in 0..n {
                self.tail[i * block + c] -= mean;
            }
        }
    }

    fn flatten(&self) -> Vector {
        let mut out = Vector::zeros(self.head.len() + self.tail.len());
        out.rows_mut(0, self.head.len()).copy_from(&self.head);
        out.rows_mut(self.head.len(), self.tail.len()).copy_from(&self.tail);
        out
    }

    fn unflatten(x: &Vector, block: usize) -> Self {
        Self {
            head: x.rows(0, block).into_owned(),
            tail: x.rows(block, x.len() - block).into_owned(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ConsensusOutcome {
    pub v: Vector,
    pub iterations: usize,
    pub converged: bool,
    /// `‖(εI + A)v − s‖/‖s‖` for augmented solves, evaluated as in
    /// [`BorderedState::shifted_residual`]; rounding `v` itself adds `u·‖A‖·‖v‖`.
    pub relative_residual: f64,
}

/// Right-hand side of the bordered system for the kernel rows.
fn head_rhs(op: &ConsensusOperator<'_>, s: &Vector) -> Vector {
    op.block_sum(s.as_slice())
}

/// Relaxes the kernel rows: `h ← (Σᵢ rhs(i) − εΣᵢ w(i)) / (εn)`.
fn relax_head(op: &ConsensusOperator<'_>, eps: f64, rhs_head: &Vector, tail: &Vector) -> Vector {
    let n = op.nodes() as f64;
    (rhs_head - op.block_sum(tail.as_slice()) * eps) / (eps * n)
}

/// Relaxed value of node `i`, coordinate `c`, from neighbour values in `src`.
fn relaxed(
    op: &ConsensusOperator<'_>,
    eps: f64,
    i: usize,
    c: usize,
    head: &Vector,
    rhs_tail: &Vector,
    src: &Vector,
) -> f64 {
    let b = op.block;
    let lap = op.laplacian;
    let mut acc = rhs_tail[i * b + c] - eps * head[c];
    for &(j, w) in lap.row(i) {
        acc -= w * src[j * b + c];
    }
    acc / (eps + lap.diag()[i])
}

/// Gauss-Seidel update of node `i` in place.
fn relax_node(
    op: &ConsensusOperator<'_>,
    eps: f64,
    i: usize,
    head: &Vector,
    rhs_tail: &Vector,
    tail: &mut Vector,
) {
    for c in 0..op.block {
        tail[i * op.block + c] = relaxed(op, eps, i, c, head, rhs_tail, tail);
    }
}

fn forward_sweep(
    op: &ConsensusOperator<'_>,
    eps: f64,
    st: &mut BorderedState,
    rhs_head: &Vector,
    rhs_tail: &Vector,
) {
    st.head = relax_head(op, eps, rhs_head, &st.tail);
    for i in 0..op.nodes() {
        relax_node(op, eps, i, &st.head, rhs_tail, &mut st.tail);
    }
}

fn backward_sweep(
    op: &ConsensusOperator<'_>,
    eps: f64,
    st: &mut BorderedState,
    rhs_head: &Vector,
    rhs_tail: &Vector,
) {
    for i in (0..op.nodes()).rev() {
        relax_node(op, eps, i, &st.head, rhs_tail, &mut st.tail);
    }
    st.head = relax_head(op, eps, rhs_head, &st.tail);
}

fn sweep(
    op: &ConsensusOperator<'_>,
    eps: f64,
    st: &mut BorderedState,
    rhs_head: &Vector,
    rhs_tail: &Vector,
    method: ConsensusMethod,
) -> Result<()> {
    match method {
        ConsensusMethod::Jacobi => {
            let old = st.clone();
            st.head = relax_head(op, eps, rhs_head, &old.tail);
            for i in 0..op.nodes() {
                for c in 0..op.block {
                    st.tail[i * op.block + c] =
                        relaxed(op, eps, i, c, &old.head, rhs_tail, &old.tail);
                }
            }
        }
        ConsensusMethod::GaussSeidel => forward_sweep(op, eps, st, rhs_head, rhs_tail),
        ConsensusMethod::SymmetricGaussSeidel => {
            forward_sweep(op, eps, st, rhs_head, rhs_tail);
            backward_sweep(op, eps, st, rhs_head, rhs_tail);
        }
        _ => {
            return Err(ApdError::InvalidInput(format!(
                "{} is not a stationary iteration",
                method.name()
            )))
        }
    }
    Ok(())
}

/// One Jacobi, Gauss-Seidel or symmetric Gauss-Seidel step on the bordered system.
pub fn stationary_iteration_step(
    op: &ConsensusOperator<'_>,
    eps: f64,
    state: &BorderedState,
    s: &Vector,
    method: ConsensusMethod,
) -> Result<BorderedState> {
    check_len("consensus right-hand side", op.dim(), s.len())?;
    let mut st = state.clone();
    sweep(op, eps, &mut st, &head_rhs(op, s), s, method)?;
    Ok(st)
}

fn validate(op: &ConsensusOperator<'_>, eps: f64, s: &Vector, tol: f64) -> Result<()> {
    check_len("consensus right-hand side", op.dim(), s.len())?;
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(ApdError::InvalidInput(format!("ε must be positive, got {eps}")));
    }
    if !(tol > 0.0) {
        return Err(ApdError::InvalidInput("tolerance must be positive".into()));
    }
    Ok(())
}

/// Solves `(εI + A)v = s` through the bordered system.
///
/// `start` seeds the node block (the kernel block starts at zero).
pub fn augmented_consensus_solve(
    op: &ConsensusOperator<'_>,
    eps: f64,
    s: &Vector,
    method: ConsensusMethod,
    tol: f64,
    i_max: usize,
    start: Option<&Vector>,
) -> Result<ConsensusOutcome> {
    validate(op, eps, s, tol)?;
    let snorm = s.norm();
    let mut st = BorderedState::zeros(op);
    if let Some(v0) = start {
        check_len("consensus warm start", op.dim(), v0.len())?;
        st.tail.copy_from(v0);
    }
    let rel = |st: &BorderedState| {
        if snorm == 0.0 {
            st.recover(op.block).norm()
        } else {
            st.shifted_residual(op, eps, s).norm() / snorm
        }
    };
    let r0 = rel(&st);
    if r0 <= tol {
        return Ok(ConsensusOutcome {
            v: st.recover(op.block),
            iterations: 0,
            converged: true,
            relative_residual: r0,
        });
    }
    let rhs_head = head_rhs(op, s);
    match method {
        ConsensusMethod::PcgJacobi | ConsensusMethod::PcgSgs => {
            pcg_bordered(op, eps, s, &rhs_head, method, tol, i_max, st)
        }
        _ => {
            let mut last = r0;
            for it in 1..=i_max {
                sweep(op, eps, &mut st, &rhs_head, s, method)?;
                last = rel(&st);
                if last <= tol {
                    return Ok(ConsensusOutcome {
                        v: st.recover(op.block),
                        iterations: it,
                        converged: true,
                        relative_residual: last,
                    });
                }
            }
            Ok(ConsensusOutcome {
                v: st.recover(op.block),
                iterations: i_max,
                converged: false,
                relative_residual: last,
            })
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn pcg_bordered(
    op: &ConsensusOperator<'_>,
    eps: f64,
    s: &Vector,
    rhs_head: &Vector,
    method: ConsensusMethod,
    tol: f64,
    i_max: usize,
    start: BorderedState,
) -> Result<ConsensusOutcome> {
    let b = op.block;
    let n = op.nodes();
    let snorm = s.norm();
    let apply = |x: &Vector| {
        let st = BorderedState::unflatten(x, b);
        let head = st.head.clone() * (eps * n as f64) + op.block_sum(st.tail.as_slice()) * eps;
        let mut tail = op.apply(&st.tail) + &st.tail * eps;
        for k in 0..tail.len() {
            tail[k] += eps * st.head[k % b];
        }
        BorderedState { head, tail }.flatten()
    };
    let mut diag = Vector::zeros(b + op.dim());
    for c in 0..b {
        diag[c] = eps * n as f64;
    }
    for i in 0..n {
        for c in 0..b {
            diag[b + i * b + c] = eps + op.laplacian.diag()[i];
        }
    }
    // The bordered operator is singular: (−e_c, 1 ⊗ e_c) lies in its kernel for
    // every coordinate c. Kernel components of a direction change neither the
    // PCG scalars (the residual is orthogonal to the kernel) nor the recovered
    // v, so each preconditioned residual is shifted to a mean-free tail. On that
    // subspace the operator is definite, and the consensus part of v, of size
    // 1/ε, lives in the head instead of being smeared over the tail.
    let project = |x: &mut Vector| {
        for c in 0..b {
            let mean = (0..n).map(|i| x[b + i * b + c]).sum::<f64>() / n as f64;
            x[c] += mean;
            for i in 0..n {
                x[b + i * b + c] -= mean;
            }
        }
    };
    let precond = |r: &Vector| {
        let mut out = match method {
            ConsensusMethod::PcgJacobi => r.component_div(&diag),
            _ => {
                let rs = BorderedState::unflatten(r, b);
                let mut st = BorderedState::zeros(op);
                forward_sweep(op, eps, &mut st, &rs.head, &rs.tail);
                backward_sweep(op, eps, &mut st, &rs.head, &rs.tail);
                st.flatten()
            }
        };
        project(&mut out);
        out
    };
    let rhs = BorderedState {
        head: rhs_head.clone(),
        tail: s.clone(),
    }
    .flatten();
    let mut start = start;
    start.center(b);
    let mut last = f64::INFINITY;
    let out = pcg_loop(apply, &rhs, precond, &start.flatten(), i_max, |d, r, _, _| {
        // The node rows of the bordered residual are exactly −((εI + A)v − s).
        let cheap = r.rows(b, r.len() - b).norm() / snorm;
        if cheap > tol {
            last = cheap;
            return false;
        }
        last = BorderedState::unflatten(d, b).shifted_residual(op, eps, s).norm() / snorm;
        last <= tol
    })?;
    let st = BorderedState::unflatten(&out.solution, b);
    let relative_residual = st.shifted_residual(op, eps, s).norm() / snorm;
    Ok(ConsensusOutcome {
        v: st.recover(b),
        iterations: out.iterations,
        converged: out.converged && relative_residual <= tol,
        relative_residual: if relative_residual.is_finite() { relative_residual } else { last },
    })
}

/// Jacobi, Gauss-Seidel or symmetric Gauss-Seidel on the original system `(εI + A)v = s`.
pub fn plain_stationary_solve(
    op: &ConsensusOperator<'_>,
    eps: f64,
    s: &Vector,
    method: ConsensusMethod,
    tol: f64,
    i_max: usize,
) -> Result<ConsensusOutcome> {
    validate(op, eps, s, tol)?;
    let b = op.block;
    let lap = op.laplacian;
    let snorm = s.norm();
    let mut v = Vector::zeros(op.dim());
    let rel = |v: &Vector| {
        if snorm == 0.0 {
            v.norm()
        } else {
            op.shifted_residual(eps, v, s).norm() / snorm
        }
    };
    let value = |i: usize, c: usize, src: &Vector| {
        let mut acc = s[i * b + c];
        for &(j, w) in lap.row(i) {
            acc -= w * src[j * b + c];
        }
        acc / (eps + lap.diag()[i])
    };
    let mut last = rel(&v);
    if last <= tol {
        return Ok(ConsensusOutcome {
            v,
            iterations: 0,
            converged: true,
            relative_residual: last,
        });
    }
    for it in 1..=i_max {
        match method {
            ConsensusMethod::Jacobi => {
                let old = v.clone();
                for i in 0..op.nodes() {
                    for c in 0..b {
                        v[i * b + c] = value(i, c, &old);
                    }
                }
            }
            ConsensusMethod::GaussSeidel | ConsensusMethod::SymmetricGaussSeidel => {
                for i in 0..op.nodes() {
                    for c in 0..b {
                        v[i * b + c] = value(i, c, &v);
                    }
                }
                if method == ConsensusMethod::SymmetricGaussSeidel {
                    for i in (0..op.nodes()).rev() {
                        for c in 0..b {
                            v[i * b + c] = value(i, c, &v);
                        }
                    }
                }
            }
            _ => {
                return Err(ApdError::InvalidInput(format!(
                    "{} is not a stationary iteration",
                    method.name()
                )))
            }
        }
        last = rel(&v);
        if last <= tol {
            return Ok(ConsensusOutcome {
                v,
                iterations: it,
                converged: true,
                relative_residual: last,
            });
        }
    }
    Ok(ConsensusOutcome {
        v,
        iterations: i_max,
        converged: false,
        relative_residual: last,
    })
}
