//! One iteration of each discretisation.


use crate::error::{ApdError, Result};
use crate::inner::{assemble_saddle_subproblem, ssn_solve, DualMapContext, SsnConfig};
use crate::linalg::{Matrix, Vector};
use crate::model::{ProblemInstance, ProxableFunction};
use crate::schedule::{advance_scaling, step_size, StepRule};
use crate::solvers::subproblem::FullProx;
use crate::solvers::{InnerConfig, IterateState, Scheme};

/// Result of a single step: the new iterate and the inner work it took.
#[derive(Debug, Clone)]
pub struct StepOutput {
    pub state: IterateState,
    pub inner_iters: usize,
}

/// Per-run data shared by all steps of one scheme.
#[derive(Debug)]
pub struct Stepper<'a> {
    problem: &'a ProblemInstance,
    scheme: Scheme,
    beta: f64,
    mu_beta: f64,
    full_prox: Option<FullProx>,
    dense_quadratic: Option<(Matrix, Vector)>,
    inner: InnerConfig,
    /// `λ − θ⁻¹(Ax − b)` of the starting point, reused by the implicit scheme.
    invariant: Option<Vector>,
}

impl<'a> Stepper<'a> {
    pub fn new(problem: &'a ProblemInstance, scheme: Scheme, inner: InnerConfig) -> Result<Self> {
        let beta = scheme.beta(problem);
        let mu_beta = scheme.mu_beta(problem);
        let mut out = Self {
            problem,
            scheme,
            beta,
            mu_beta,
            full_prox: None,
            dense_quadratic: None,
            inner,
            invariant: None,
        };
        match scheme {
            Scheme::Implicit => {
                let dense = problem.nonsmooth.is_zero_unconstrained()
                    && problem.constraint.dense_matrix().is_some();
                match (dense, problem.smooth.quadratic()) {
                    (true, Some(qc)) => out.dense_quadratic = Some(qc),
                    _ => out.full_prox = Some(FullProx::build(problem, 0.0)?),
                }
            }
            Scheme::SemiApd => out.full_prox = Some(FullProx::build(problem, beta)?),
            Scheme::SemiApdfb | Scheme::ExApdfb => {}
        }
        Ok(out)
    }

    /// Pins the invariant `λ − θ⁻¹(Ax − b)` to its value at `s0`.
    ///
    /// Without it the implicit scheme recomputes the invariant every step, and
    /// the `1/θ` factor doubles its rounding error per step once `θ` is below
    /// machine precision.
    pub fn with_invariant(mut self, s0: &IterateState) -> Self {
        self.invariant = Some(s0.invariant(self.problem));
        self
    }

    /// `β` used by this scheme (always 0 for the implicit scheme).
    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn mu_beta(&self) -> f64 {
        self.mu_beta
    }

    /// Step rule; `alpha` is only read by the implicit scheme.
    pub fn rule(&self, alpha: f64) -> StepRule {
        let p = self.problem;
        let l_beta = self.scheme_l_beta();
        match self.scheme {
            Scheme::Implicit => StepRule::Free { alpha },
            Scheme::SemiApd => StepRule::SemiApd {
                op_norm: p.constraint.op_norm(),
            },
            Scheme::SemiApdfb => StepRule::SemiApdfb { l_beta },
            Scheme::ExApdfb => StepRule::ExApdfb {
                l_beta,
                op_norm: p.constraint.op_norm(),
            },
        }
    }

    fn scheme_l_beta(&self) -> f64 {
        let a = self.problem.constraint.op_norm();
        self.problem.smooth.lipschitz() + self.beta * a * a
    }

    fn inner_eps(&self, theta: f64) -> f64 {
        self.inner.tolerance(theta).clamp(1e-13, 0.5)
    }

    pub fn step(&self, s: &IterateState, alpha: f64) -> Result<StepOutput> {
        match self.scheme {
            Scheme::Implicit => self.implicit(s, alpha),
            Scheme::SemiApd => self.semi_apd(s, alpha),
            Scheme::SemiApdfb => self.semi_apdfb(s, alpha),
            Scheme::ExApdfb => self.ex_apdfb(s, alpha),
        }
    }

    fn finish(&self, s: &IterateState, alpha: f64, x: Vector, v: Vector, lambda: Vector, y: Vector) -> Result<IterateState> {
        Ok(IterateState {
            x,
            v,
            lambda,
            y: Some(y),
            scaling: advance_scaling(s.scaling, alpha, self.mu_beta)?,
            k: s.k + 1,
        })
    }

    /// `λ + (α/θ)(Av − b)`.
    fn dual_update(&self, s: &IterateState, alpha: f64, v: &Vector) -> Vector {
        &s.lambda + self.problem.constraint.residual(v) * (alpha / s.scaling.theta)
    }

    fn implicit(&self, s: &IterateState, alpha: f64) -> Result<StepOutput> {
        let p = self.problem;
        let c = &p.constraint;
        let (theta, gamma) = (s.scaling.theta, s.scaling.gamma);
        let theta_next = theta / (1.0 + alpha);
        let tau = gamma * (1.0 + alpha);
        let y = (&s.x + &s.v * alpha) / (1.0 + alpha);
        let eta = alpha * alpha / tau;
        // λ − θ⁻¹(Ax − b) is the same before and after the step.
        let carried = match &self.invariant {
            Some(xi) => xi.clone(),
            None => &s.lambda - c.residual(&s.x) / theta,
        };
        let (x_next, lambda_next, iters) = if let Some((q, lin)) = &self.dense_quadratic {
            // H x + Aᵀμ = y/η − lin − Aᵀ(carried), Ax − θ'μ = b with H = Q + I/η and μ
            // the multiplier increment. Every block of this matrix stays O(1) as
            // θ' and 1/η vanish, and it is regular whenever ker Q ∩ ker A is trivial
            // and A has full row rank. Eliminating x instead goes through H⁻¹ ~ η
            // and loses the invariant Ax − b = θ'(λ − carried) to rounding.
            let a = c.dense_matrix().expect("dense route checked at construction");
            let (n, m) = (p.dim(), c.rhs().len());
            let mut kkt = Matrix::zeros(n + m, n + m);
            kkt.view_mut((0, 0), (n, n)).copy_from(&(q + Matrix::identity(n, n) / eta));
            kkt.view_mut((0, n), (n, m)).copy_from(&a.transpose());
            kkt.view_mut((n, 0), (m, n)).copy_from(a);
            kkt.view_mut((n, n), (m, m)).copy_from(&(Matrix::identity(m, m) * -theta_next));
            let mut rhs = Vector::zeros(n + m);
            rhs.rows_mut(0, n).copy_from(&(&y / eta - lin - a.transpose() * &carried));
            rhs.rows_mut(n, m).copy_from(c.rhs());
            let sol = kkt.lu().solve(&rhs).ok_or_else(|| {
                ApdError::InvalidInput("implicit subproblem matrix is singular".into())
            })?;
            let (x, mu) = (sol.rows(0, n).into_owned(), sol.rows(n, m).into_owned());
            (x, &carried + mu, 0)
        } else {
            let f = match &self.full_prox {
                Some(FullProx::Composite(cp)) => cp as &dyn ProxableFunction,
                _ => {
                    return Err(ApdError::Unsupported(
                        "implicit step needs a dense quadratic or a composite prox".into(),
                    ))
                }
            };
            let r = &carried * theta_next - c.rhs();
            let ctx = DualMapContext::new(theta_next, 1.0, eta, y.clone(), r, c, f)?;
            let cfg = SsnConfig {
                tol: self.inner.tolerance(theta),
                ..self.inner.ssn
            };
            let out = ssn_solve(&ctx, &s.lambda, &cfg)?;
            if !out.converged {
                return Err(ApdError::NotConverged {
                    what: "semismooth Newton",
                    iterations: out.iterations,
                    residual: out.residual_norm,
                });
            }
            (ctx.primal(&out.lambda)?, out.lambda, out.iterations)
        };
        let v_next = &x_next + (&x_next - &s.x) / alpha;
        let state = self.finish(s, alpha, x_next, v_next, lambda_next, y)?;
        Ok(StepOutput {
            state,
            inner_iters: iters,
        })
    }

    fn semi_apd(&self, s: &IterateState, alpha: f64) -> Result<StepOutput> {
        let p = self.problem;
        let mu = self.mu_beta;
        let gamma = s.scaling.gamma;
        let lambda_hat = self.dual_update(s, alpha, &s.v);
        let tau = gamma + mu * alpha + gamma * alpha;
        let y = (&s.x * (gamma + mu * alpha) + &s.v * (gamma * alpha)) / tau;
        let eta = alpha * alpha / tau;
        let arg = &y - p.constraint.apply_adjoint(&lambda_hat) * eta;
        let prox = self.full_prox.as_ref().expect("built for the semi-implicit scheme");
        let x_next = prox.apply(eta, &arg)?;
        let v_next = &x_next + (&x_next - &s.x) / alpha;
        let lambda_next = self.dual_update(s, alpha, &v_next);
        Ok(StepOutput {
            state: self.finish(s, alpha, x_next, v_next, lambda_next, y)?,
            inner_iters: 0,
        })
    }

    /// `(y, w, τ)` shared by both forward-backward schemes.
    fn extrapolate(&self, s: &IterateState, alpha: f64) -> (Vector, Vector, f64) {
        let mu = self.mu_beta;
        let gamma = s.scaling.gamma;
        let y = (&s.x + &s.v * alpha) / (1.0 + alpha);
        let tau = gamma + mu * alpha;
        let w = (&s.v * gamma + &y * (mu * alpha)) / tau;
        (y, w, tau)
    }

    fn semi_apdfb(&self, s: &IterateState, alpha: f64) -> Result<StepOutput> {
        let p = self.problem;
        let c = &p.constraint;
        let theta = s.scaling.theta;
        let (y, w, tau) = self.extrapolate(s, alpha);
        let t = alpha / tau;
        let z = &w - p.smooth_gradient_beta(&y, self.beta) * t;
        let r = &s.lambda * theta - c.rhs() * alpha;
        let ctx = DualMapContext::new(theta, alpha, t, z, r, c, p.nonsmooth.as_ref())?;
        let (v_next, iters) = if p.nonsmooth.is_zero_unconstrained() {
            let sys = assemble_saddle_subproblem(&ctx)?;
            let (_, v, out) = sys.solve(&s.lambda, self.inner_eps(theta), self.inner.pcg_max_iter)?;
            if !out.converged {
                return Err(ApdError::NotConverged {
                    what: "PCG on the saddle system",
                    iterations: out.iterations,
                    residual: out.delta.sqrt(),
                });
            }
            (v, out.iterations)
        } else {
            let cfg = SsnConfig {
                tol: self.inner.tolerance(theta),
                ..self.inner.ssn
            };
            let out = ssn_solve(&ctx, &s.lambda, &cfg)?;
            if !out.converged {
                return Err(ApdError::NotConverged {
                    what: "semismooth Newton",
                    iterations: out.iterations,
                    residual: out.residual_norm,
                });
            }
            (ctx.primal(&out.lambda)?, out.iterations)
        };
        // Recomputing λ from v keeps λ − θ⁻¹(Ax − b) invariant regardless of inner accuracy.
        let lambda_next = self.dual_update(s, alpha, &v_next);
        let x_next = (&s.x + &v_next * alpha) / (1.0 + alpha);
        Ok(StepOutput {
            state: self.finish(s, alpha, x_next, v_next, lambda_next, y)?,
            inner_iters: iters,
        })
    }

    fn ex_apdfb(&self, s: &IterateState, alpha: f64) -> Result<StepOutput> {
        let p = self.problem;
        let (y, w, tau) = self.extrapolate(s, alpha);
        let eta = alpha / tau;
        let lambda_hat = self.dual_update(s, alpha, &s.v);
        let grad = p.smooth_gradient_beta(&y, self.beta) + p.constraint.apply_adjoint(&lambda_hat);
        let v_next = p.nonsmooth.prox(eta, &(&w - grad * eta))?;
        let lambda_next = self.dual_update(s, alpha, &v_next);
        let x_next = (&s.x + &v_next * alpha) / (1.0 + alpha);
        Ok(StepOutput {
            state: self.finish(s, alpha, x_next, v_next, lambda_next, y)?,
            inner_iters: 0,
        })
    }

    /// Step size from the scheme's rule at the current scaling.
    pub fn step_size(&self, s: &IterateState, alpha: f64) -> Result<f64> {
        step_size(self.rule(alpha), s.scaling)
    }
}

fn single_step(scheme: Scheme, s: &IterateState, p: &ProblemInstance, alpha: f64) -> Result<IterateState> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(ApdError::InvalidInput(format!("step size must be positive, got {alpha}")));
    }
    let stepper = Stepper::new(p, scheme, InnerConfig::default())?;
    Ok(stepper.step(s, alpha)?.state)
}

/// One step of the fully implicit scheme (`β = μ = 0`).
pub fn implicit_apd_step(s: &IterateState, p: &ProblemInstance, alpha: f64) -> Result<IterateState> {
    single_step(Scheme::Implicit, s, p, alpha)
}

pub fn semi_apd_step(s: &IterateState, p: &ProblemInstance, alpha: f64) -> Result<IterateState> {
    single_step(Scheme::SemiApd, s, p, alpha)
}

pub fn semi_apdfb_step(s: &IterateState, p: &ProblemInstance, alpha: f64) -> Result<IterateState> {
    single_step(Scheme::SemiApdfb, s, p, alpha)
}

pub fn ex_apdfb_step(s: &IterateState, p: &ProblemInstance, alpha: f64) -> Result<IterateState> {
    single_step(Scheme::ExApdfb, s, p, alpha)
}
