//! The monotone map `F_k` behind the coupled `(λ, v)` subproblem and its merit function.
//!
//! For the subproblem `λ = λ_k + (α/θ)(Av − b)`, `v = prox_{tg}(z − tAᵀλ)`,
//! eliminating `v` leaves
//!
//! `F(λ) = θλ − α A prox_{tg}(z − tAᵀλ) − r`, with `r = θλ_k − αb`,
//!
//! which is the gradient of the strongly convex merit
//! `𝓕(λ) = (θ/2)‖λ‖² − ⟨r, λ⟩ + α·[g*]_t(z/t − Aᵀλ)`.

use crate::error::{check_len, ApdError, Result};
use crate::inner::pcg::{pcg_solve, PcgOutcome};
use crate::linalg::Vector;
use crate::model::{LinearConstraint, ProxableFunction};

#[derive(Debug, Clone)]
pub struct DualMapContext<'a> {
    pub theta: f64,
    pub alpha: f64,
    pub t: f64,
    pub z: Vector,
    pub r: Vector,
    pub constraint: &'a LinearConstraint,
    pub g: &'a dyn ProxableFunction,
}

impl<'a> DualMapContext<'a> {
    pub fn new(
        theta: f64,
        alpha: f64,
        t: f64,
        z: Vector,
        r: Vector,
        constraint: &'a LinearConstraint,
        g: &'a dyn ProxableFunction,
    ) -> Result<Self> {
        for (name, val) in [("θ", theta), ("α", alpha), ("t", t)] {
            if !(val > 0.0) || !val.is_finite() {
                return Err(ApdError::InvalidInput(format!("{name} must be positive, got {val}")));
            }
        }
        check_len("dual map z", constraint.cols(), z.len())?;
        check_len("dual map r", constraint.rows(), r.len())?;
        Ok(Self {
            theta,
            alpha,
            t,
            z,
            r,
            constraint,
            g,
        })
    }

    /// Lipschitz constant `θ + αt‖A‖²` of `F`.
    pub fn rho(&self) -> f64 {
        let a = self.constraint.op_norm();
        self.theta + self.alpha * self.t * a * a
    }

    /// `z − tAᵀλ`.
    pub fn prox_argument(&self, lambda: &Vector) -> Vector {
        &self.z - self.constraint.apply_adjoint(lambda) * self.t
    }

    /// `prox_{tg}(z − tAᵀλ)`, the primal point attached to `λ`.
    pub fn primal(&self, lambda: &Vector) -> Result<Vector> {
        self.g.prox(self.t, &self.prox_argument(lambda))
    }

    fn residual_parts(&self, lambda: &Vector) -> Result<(Vector, f64)> {
        let ap = self.constraint.apply(&self.primal(lambda)?) * self.alpha;
        let scale = self.theta * lambda.norm() + ap.norm() + self.r.norm();
        Ok((lambda * self.theta - ap - &self.r, scale))
    }

    pub fn jacobian_diag(&self, lambda: &Vector) -> Result<Vector> {
        self.g.gen_jacobian(self.t, &self.prox_argument(lambda))
    }

    /// `(θI + αt A S Aᵀ) d` for a diagonal `S`.
    pub fn newton_apply(&self, s: &Vector, d: &Vector) -> Vector {
        let inner = self.constraint.apply_adjoint(d).component_mul(s);
        d * self.theta + self.constraint.apply(&inner) * (self.alpha * self.t)
    }

    /// Diagonal of the Newton operator when the constraint matrix is stored densely.
    pub fn newton_diagonal(&self, s: &Vector) -> Option<Vector> {
        let a = self.constraint.dense_matrix()?;
        let w = self.alpha * self.t;
        Some(Vector::from_fn(a.nrows(), |i, _| {
            self.theta + w * a.row(i).iter().zip(s.iter()).map(|(x, si)| x * x * si).sum::<f64>()
        }))
    }
}

/// `F_k(λ)`.
pub fn eval_fk(ctx: &DualMapContext<'_>, lambda: &Vector) -> Result<Vector> {
    check_len("multiplier", ctx.constraint.rows(), lambda.len())?;
    Ok(ctx.residual_parts(lambda)?.0)
}

/// `F_k(λ)` together with the magnitude of its summands, used as a rounding floor.
pub(crate) fn eval_fk_scaled(ctx: &DualMapContext<'_>, lambda: &Vector) -> Result<(Vector, f64)> {
    ctx.residual_parts(lambda)
}

/// `𝓕_k(λ)`.
///
/// The envelope term is evaluated at the prox point `p = prox_{tg}(tx)`,
/// `x = z/t − Aᵀλ`: the dual minimiser is `y* = x − p/t ∈ ∂g_X(p)`, so the
/// Fenchel–Young equality gives `g*(y*) = ⟨y*, p⟩ − g(p)` and
/// `[g*]_t(x) = ⟨x, p⟩ − ‖p‖²/(2t) − g(p)`. This needs only the prox and
/// `g` itself and is exact wherever the prox is.
pub fn eval_merit(ctx: &DualMapContext<'_>, lambda: &Vector) -> Result<f64> {
    check_len("multiplier", ctx.constraint.rows(), lambda.len())?;
    let x = &ctx.z / ctx.t - ctx.constraint.apply_adjoint(lambda);
    let p = ctx.g.prox(ctx.t, &(&x * ctx.t))?;
    let gp = ctx.g.value(&p);
    if !gp.is_finite() {
        return Err(ApdError::InvalidInput(
            "prox returned a point where g is not finite".into(),
        ));
    }
    let envelope = x.dot(&p) - p.norm_squared() / (2.0 * ctx.t) - gp;
    Ok(0.5 * ctx.theta * lambda.norm_squared() - ctx.r.dot(lambda) + ctx.alpha * envelope)
}

/// The two equivalent linear systems of the subproblem when `g = 0`, `X = ℝⁿ`.
///
/// Dual: `(θI + αtAAᵀ)λ = θλ_k + α(Az − b) = r + αAz`.
/// Primal: `(θI + αtAᵀA)v = θz − tAᵀ(θλ_k − αb) = θz − tAᵀr`.
#[derive(Debug, Clone)]
pub struct SaddleSystems<'c, 'a> {
    ctx: &'c DualMapContext<'a>,
    pub dual_rhs: Vector,
    pub primal_rhs: Vector,
}

pub fn assemble_saddle_subproblem<'c, 'a>(
    ctx: &'c DualMapContext<'a>,
) -> Result<SaddleSystems<'c, 'a>> {
    if !ctx.g.is_zero_unconstrained() {
        return Err(ApdError::Unsupported(
            "linear saddle systems need g = 0 and X = ℝⁿ".into(),
        ));
    }
    let dual_rhs = &ctx.r + ctx.constraint.apply(&ctx.z) * ctx.alpha;
    let primal_rhs = &ctx.z * ctx.theta - ctx.constraint.apply_adjoint(&ctx.r) * ctx.t;
    Ok(SaddleSystems {
        ctx,
        dual_rhs,
        primal_rhs,
    })
}

impl SaddleSystems<'_, '_> {
    pub fn dual_apply(&self, lambda: &Vector) -> Vector {
        let c = self.ctx;
        lambda * c.theta + c.constraint.apply(&c.constraint.apply_adjoint(lambda)) * (c.alpha * c.t)
    }

    pub fn primal_apply(&self, v: &Vector) -> Vector {
        let c = self.ctx;
        v * c.theta + c.constraint.apply_adjoint(&c.constraint.apply(v)) * (c.alpha * c.t)
    }

    fn jacobi(&self, dual: bool) -> Option<Vector> {
        let c = self.ctx;
        let a = c.constraint.dense_matrix()?;
        let w = c.alpha * c.t;
        Some(if dual {
            Vector::from_fn(a.nrows(), |i, _| c.theta + w * a.row(i).norm_squared())
        } else {
            Vector::from_fn(a.ncols(), |j, _| c.theta + w * a.column(j).norm_squared())
        })
    }

    /// Solves the smaller of the two systems by Jacobi-preconditioned CG.
    ///
    /// Returns `(λ, v, pcg_iterations)` with `v = z − tAᵀλ` on the dual route
    /// and `λ = λ_k + (α/θ)(Av − b)` on the primal route.
    pub fn solve(
        &self,
        lambda_k: &Vector,
        eps: f64,
        i_max: usize,
    ) -> Result<(Vector, Vector, PcgOutcome)> {
        let c = self.ctx;
        let dual = c.constraint.rows() <= c.constraint.cols();
        let diag = self.jacobi(dual);
        let precond = |x: &Vector| match &diag {
            Some(d) => x.component_div(d),
            None => x.clone(),
        };
        if dual {
            let out = pcg_solve(|x| self.dual_apply(x), &self.dual_rhs, precond, lambda_k, eps, i_max)?;
            let v = c.prox_argument(&out.solution);
            Ok((out.solution.clone(), v, out))
        } else {
            let out = pcg_solve(|x| self.primal_apply(x), &self.primal_rhs, precond, &c.z, eps, i_max)?;
            let v = out.solution.clone();
            let lam = lambda_k + c.constraint.residual(&v) * (c.alpha / c.theta);
            Ok((lam, v, out))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::model::SeparableProx;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    fn row_constraint() -> LinearConstraint {
        LinearConstraint::dense(Matrix::from_row_slice(1, 2, &[1.0, 1.0]), v(&[1.0])).unwrap()
    }

    #[test]
    fn one_by_one_dual_system() {
        let c = row_constraint();
        let g = SeparableProx::zero();
        // λ_k = 0, b = 1, θ = α = 1: r = −1
        let ctx = DualMapContext::new(1.0, 1.0, 1.0, v(&[1.0, 1.0]), v(&[-1.0]), &c, &g).unwrap();
        let sys = assemble_saddle_subproblem(&ctx).unwrap();
        assert_eq!(sys.dual_apply(&v(&[1.0])), v(&[3.0]));
        assert_eq!(sys.dual_rhs, v(&[1.0]));
    }

    #[test]
    fn dual_and_primal_routes_agree() {
        let a = Matrix::from_row_slice(2, 3, &[1.0, 2.0, 0.0, -1.0, 0.5, 3.0]);
        let c = LinearConstraint::dense(a, v(&[0.3, -0.2])).unwrap();
        let g = SeparableProx::zero();
        let lambda_k = v(&[0.4, -0.1]);
        let (theta, alpha, t) = (0.7, 0.3, 0.9);
        let r = &lambda_k * theta - c.rhs() * alpha;
        let ctx = DualMapContext::new(theta, alpha, t, v(&[1.0, -2.0, 0.5]), r, &c, &g).unwrap();
        let sys = assemble_saddle_subproblem(&ctx).unwrap();
        let (lam, vv, _) = sys.solve(&lambda_k, 1e-14, 100).unwrap();
        let pv = sys.primal_apply(&vv) - &sys.primal_rhs;
        assert!(pv.norm() < 1e-12, "{pv}");
        let again = &lambda_k + c.residual(&vv) * (alpha / theta);
        assert!((again - &lam).norm() < 1e-12);
        assert!(eval_fk(&ctx, &lam).unwrap().norm() < 1e-12);
    }

    #[test]
    fn zero_operator_decouples() {
        let c = LinearConstraint::dense(Matrix::zeros(2, 2), v(&[0.0, 0.0])).unwrap();
        let g = SeparableProx::zero();
        let ctx = DualMapContext::new(2.0, 1.0, 1.0, v(&[1.0, 1.0]), v(&[0.0, 0.0]), &c, &g).unwrap();
        let sys = assemble_saddle_subproblem(&ctx).unwrap();
        assert_eq!(sys.dual_apply(&v(&[1.0, -1.0])), v(&[2.0, -2.0]));
        assert_eq!(sys.primal_apply(&v(&[1.0, -1.0])), v(&[2.0, -2.0]));
    }

    #[test]
    fn merit_for_zero_g_is_the_expanded_quadratic() {
        let a = Matrix::from_row_slice(2, 3, &[1.0, 2.0, 0.0, -1.0, 0.5, 3.0]);
        let c = LinearConstraint::dense(a.clone(), v(&[0.3, -0.2])).unwrap();
        let g = SeparableProx::zero();
        let (theta, alpha, t) = (0.7, 0.3, 0.9);
        let z = v(&[1.0, -2.0, 0.5]);
        let r = v(&[0.1, 0.2]);
        let ctx = DualMapContext::new(theta, alpha, t, z.clone(), r.clone(), &c, &g).unwrap();
        let lam = v(&[0.5, -1.5]);
        let x = &z / t - a.transpose() * &lam;
        let expect = 0.5 * theta * lam.norm_squared() - r.dot(&lam) + alpha * 0.5 * t * x.norm_squared();
        assert!((eval_merit(&ctx, &lam).unwrap() - expect).abs() < 1e-13);
    }

    #[test]
    fn affine_map_difference() {
        let a = Matrix::from_row_slice(1, 2, &[1.0, 2.0]);
        let c = LinearConstraint::dense(a, v(&[1.0])).unwrap();
        let g = SeparableProx::zero();
        let ctx = DualMapContext::new(0.5, 2.0, 0.25, v(&[1.0, 1.0]), v(&[0.3]), &c, &g).unwrap();
        let lam = v(&[0.8]);
        let diff = eval_fk(&ctx, &lam).unwrap() - eval_fk(&ctx, &v(&[0.0])).unwrap();
        // (θ + αt‖a‖²)λ = (0.5 + 0.5·5)·0.8
        assert!((diff[0] - 3.0 * 0.8).abs() < 1e-14);
    }
}
