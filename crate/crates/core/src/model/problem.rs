//! Problem instances `min f(x) s.t. Ax = b, x ∈ X` with `f = h + g`.

use std::sync::Arc;

use rand::Rng;

use super::constraint::LinearConstraint;
use super::prox::{ProxableFunction, SeparableProx};
use super::smooth::{Quadratic, SmoothOracle};
use crate::error::{check_len, ApdError, Result};
use crate::linalg::{gaussian_matrix, gaussian_vector, seeded_rng, Matrix, Vector};

#[derive(Debug, Clone)]
pub struct ProblemInstance {
    pub smooth: Arc<dyn SmoothOracle>,
    pub nonsmooth: Arc<dyn ProxableFunction>,
    pub constraint: LinearConstraint,
    /// Requested augmentation weight; see [`ProblemInstance::effective_beta`].
    pub beta: f64,
}

/// A primal-dual solution `(x*, λ*)` together with `f(x*)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SaddlePoint {
    pub x: Vector,
    pub lambda: Vector,
    pub objective: f64,
}

impl ProblemInstance {
    pub fn new(
        smooth: Arc<dyn SmoothOracle>,
        nonsmooth: Arc<dyn ProxableFunction>,
        constraint: LinearConstraint,
        beta: f64,
    ) -> Result<Self> {
        let n = smooth.dim();
        check_len("constraint columns", n, constraint.cols())?;
        if let Some(d) = nonsmooth.dim() {
            check_len("nonsmooth dimension", n, d)?;
        }
        if !(beta >= 0.0) || !beta.is_finite() {
            return Err(ApdError::InvalidInput(format!("β must be finite and ≥ 0, got {beta}")));
        }
        Ok(Self {
            smooth,
            nonsmooth,
            constraint,
            beta,
        })
    }

    /// Smooth objective with `g = 0` and `X = ℝⁿ`.
    pub fn smooth_only(smooth: Arc<dyn SmoothOracle>, constraint: LinearConstraint) -> Result<Self> {
        Self::new(smooth, Arc::new(SeparableProx::zero()), constraint, 0.0)
    }

    pub fn with_beta(mut self, beta: f64) -> Result<Self> {
        if !(beta >= 0.0) || !beta.is_finite() {
            return Err(ApdError::InvalidInput(format!("β must be finite and ≥ 0, got {beta}")));
        }
        self.beta = beta;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.smooth.dim()
    }

    pub fn n_constraints(&self) -> usize {
        self.constraint.rows()
    }

    /// `β`, forced to 0 unless a positive `σ_min(A)` has been declared.
    pub fn effective_beta(&self) -> f64 {
        if self.constraint.sigma_min() > 0.0 {
            self.beta
        } else {
            0.0
        }
    }

    pub fn mu(&self) -> f64 {
        self.smooth.strong_convexity()
    }

    /// `μ + β·σ_min²` for the effective `β`.
    pub fn mu_beta(&self) -> f64 {
        let s = self.constraint.sigma_min();
        self.mu() + self.effective_beta() * s * s
    }

    /// `L + β‖A‖²` for the effective `β`.
    pub fn l_beta(&self) -> f64 {
        let a = self.constraint.op_norm();
        self.smooth.lipschitz() + self.effective_beta() * a * a
    }

    /// `f(x) = h(x) + g(x)`, `+∞` outside `X`.
    pub fn objective(&self, x: &Vector) -> f64 {
        self.smooth.value(x) + self.nonsmooth.value(x)
    }

    /// `∇h(x) + βAᵀ(Ax − b)`.
    pub fn smooth_gradient_beta(&self, x: &Vector, beta: f64) -> Vector {
        let mut g = self.smooth.gradient(x);
        if beta > 0.0 {
            g += self.constraint.apply_adjoint(&self.constraint.residual(x)) * beta;
        }
        g
    }

    pub fn is_smooth(&self) -> bool {
        self.nonsmooth.is_zero_unconstrained()
    }

    /// Starting point: the projection of the origin onto `X`.
    pub fn initial_point(&self) -> Result<Vector> {
        self.nonsmooth.project(&Vector::zeros(self.dim()))
    }
}

/// `f(x) + (β/2)‖Ax − b‖² + ⟨λ, Ax − b⟩`, `+∞` when `x ∉ X`.
pub fn evaluate_augmented_lagrangian(
    p: &ProblemInstance,
    x: &Vector,
    lambda: &Vector,
    beta: f64,
) -> Result<f64> {
    check_len("primal point", p.dim(), x.len())?;
    check_len("multiplier", p.n_constraints(), lambda.len())?;
    let f = p.objective(x);
    if !f.is_finite() {
        return Ok(f64::INFINITY);
    }
    let r = p.constraint.residual(x);
    Ok(f + 0.5 * beta * r.norm_squared() + lambda.dot(&r))
}

/// `L_β(x, λ*) − L_β(x*, λ)`, arranged so that first-order terms cancel exactly.
///
/// Evaluating the two Lagrangians separately loses all accuracy once the gap
/// drops below rounding of `f*`; here `h` enters through
/// [`SmoothOracle::value_difference`] and the multiplier terms through
/// `A(x − x*)`.
pub fn lagrangian_gap(
    p: &ProblemInstance,
    x: &Vector,
    lambda: &Vector,
    saddle: &SaddlePoint,
    beta: f64,
) -> f64 {
    let g_x = p.nonsmooth.value(x);
    if !g_x.is_finite() {
        return f64::INFINITY;
    }
    let dh = p.smooth.value_difference(x, &saddle.x);
    let dg = g_x - p.nonsmooth.value(&saddle.x);
    let r_star = p.constraint.residual(&saddle.x);
    let r = p.constraint.residual(x);
    let shift = p.constraint.apply(&(x - &saddle.x));
    dh + dg + saddle.lambda.dot(&shift) + saddle.lambda.dot(&r_star) - lambda.dot(&r_star)
        + 0.5 * beta * (r.norm_squared() - r_star.norm_squared())
}

/// `(‖Ax − b‖, stationarity)`.
///
/// Stationarity is `‖∇f + Aᵀλ‖` for smooth objectives and the prox-gradient
/// residual `‖x − prox_g(1, x − ∇h − Aᵀλ)‖` otherwise.
pub fn kkt_residual(p: &ProblemInstance, x: &Vector, lambda: &Vector) -> Result<(f64, f64)> {
    check_len("primal point", p.dim(), x.len())?;
    check_len("multiplier", p.n_constraints(), lambda.len())?;
    let feas = p.constraint.residual(x).norm();
    let grad = p.smooth.gradient(x) + p.constraint.apply_adjoint(lambda);
    let stat = if p.is_smooth() {
        grad.norm()
    } else {
        let u = x - grad;
        (x - p.nonsmooth.prox(1.0, &u)?).norm()
    };
    Ok((feas, stat))
}

/// Saddle point of a quadratic, unconstrained, smooth problem from the dense KKT system.
pub fn solve_reference_saddle(p: &ProblemInstance) -> Result<SaddlePoint> {
    if !p.nonsmooth.is_zero_unconstrained() {
        return Err(ApdError::NoReference("nonsmooth part or set constraint present".into()));
    }
    let (q, c) = p
        .smooth
        .quadratic()
        .ok_or_else(|| ApdError::NoReference("smooth part is not quadratic".into()))?;
    let a = p
        .constraint
        .dense_matrix()
        .ok_or_else(|| ApdError::NoReference("constraint operator is not dense".into()))?;
    let (n, m) = (p.dim(), p.n_constraints());
    let mut kkt = Matrix::zeros(n + m, n + m);
    kkt.view_mut((0, 0), (n, n)).copy_from(&q);
    kkt.view_mut((0, n), (n, m)).copy_from(&a.transpose());
    kkt.view_mut((n, 0), (m, n)).copy_from(a);
    let mut rhs = Vector::zeros(n + m);
    rhs.rows_mut(0, n).copy_from(&(-&c));
    rhs.rows_mut(n, m).copy_from(p.constraint.rhs());
    let sol = kkt
        .clone()
        .lu()
        .solve(&rhs)
        .ok_or_else(|| ApdError::NoReference("KKT matrix is singular".into()))?;
    let resid = (&kkt * &sol - &rhs).norm();
    if !sol.iter().all(|v| v.is_finite()) || resid > 1e-8 * (1.0 + rhs.norm()) {
        return Err(ApdError::NoReference("KKT matrix is numerically singular".into()));
    }
    let x = sol.rows(0, n).into_owned();
    let lambda = sol.rows(n, m).into_owned();
    let objective = p.objective(&x);
    Ok(SaddlePoint {
        x,
        lambda,
        objective,
    })
}

/// Recipe for a random instance whose saddle point is known by construction.
///
/// A point `x*` and multiplier `λ*` are drawn first; the linear term of `h` is
/// then chosen so that `0 ∈ ∇h(x*) + ∂g_X(x*) + Aᵀλ*`, and `b = Ax*`.
#[derive(Debug, Clone)]
pub struct PlantedSpec {
    pub n: usize,
    pub m: usize,
    /// Smallest eigenvalue added to the Hessian of `h`.
    pub mu: f64,
    /// Rank of the random PSD part of the Hessian.
    pub rank: usize,
    /// Weight of an `ℓ1` term, if any.
    pub l1_weight: Option<f64>,
    /// Half-width of a symmetric box `[-r, r]ⁿ`, if any.
    pub box_radius: Option<f64>,
    pub seed: u64,
}

impl PlantedSpec {
    pub fn quadratic(n: usize, m: usize, mu: f64, seed: u64) -> Self {
        Self {
            n,
            m,
            mu,
            rank: n,
            l1_weight: None,
            box_radius: None,
            seed,
        }
    }
}

pub fn planted_instance(spec: &PlantedSpec) -> Result<(ProblemInstance, SaddlePoint)> {
    let (n, m) = (spec.n, spec.m);
    if n == 0 || m == 0 || m > n {
        return Err(ApdError::InvalidInput("planted instance needs 0 < m ≤ n".into()));
    }
    let mut rng = seeded_rng(spec.seed);
    let a = gaussian_matrix(&mut rng, m, n) / (n as f64).sqrt();
    let factor = gaussian_matrix(&mut rng, spec.rank, n) / (n as f64).sqrt();
    let hess = factor.transpose() * &factor + Matrix::identity(n, n) * spec.mu;

    let mut x_star = gaussian_vector(&mut rng, n);
    let lambda_star = gaussian_vector(&mut rng, m);
    let mut subgrad = Vector::zeros(n);
    if let Some(w) = spec.l1_weight {
        for i in 0..n {
            if i % 2 == 1 {
                x_star[i] = 0.0;
                subgrad[i] = w * rng.random_range(-0.8..0.8);
            } else {
                subgrad[i] = w * x_star[i].signum();
            }
        }
    }
    let nonsmooth: Arc<dyn ProxableFunction> = match (spec.l1_weight, spec.box_radius) {
        (w, Some(r)) => {
            for i in 0..n {
                if i % 3 == 0 {
                    // Active bound with a strictly positive normal-cone element.
                    x_star[i] = if x_star[i] >= 0.0 { r } else { -r };
                    if let Some(w) = w {
                        subgrad[i] = w * x_star[i].signum();
                    }
                    subgrad[i] += x_star[i].signum() * rng.random_range(0.2..1.0);
                } else {
                    x_star[i] = x_star[i].clamp(-0.5 * r, 0.5 * r);
                    if let Some(w) = w {
                        if x_star[i] != 0.0 {
                            subgrad[i] = w * x_star[i].signum();
                        }
                    }
                }
            }
            let term = match w {
                Some(weight) => super::prox::Regularizer::L1 { weight },
                None => super::prox::Regularizer::Zero,
            };
            Arc::new(SeparableProx::new(
                term,
                super::prox::FeasibleSet::Box {
                    lower: Vector::from_element(n, -r),
                    upper: Vector::from_element(n, r),
                },
            )?)
        }
        (Some(w), None) => Arc::new(SeparableProx::l1(w)?),
        (None, None) => Arc::new(SeparableProx::zero()),
    };
    let linear = -(&hess * &x_star) - &subgrad - a.transpose() * &lambda_star;
    let smooth = Arc::new(Quadratic::new(hess, linear)?);
    let b = &a * &x_star;
    let constraint = LinearConstraint::dense(a, b)?;
    let p = ProblemInstance::new(smooth, nonsmooth, constraint, 0.0)?;
    let objective = p.objective(&x_star);
    Ok((
        p,
        SaddlePoint {
            x: x_star,
            lambda: lambda_star,
            objective,
        },
    ))
}
