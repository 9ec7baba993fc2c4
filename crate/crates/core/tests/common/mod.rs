//! Independent oracles and randomized property checks shared by the integration tests.

#![allow(dead_code)]

use std::sync::Arc;

use apd_core::inner::{eval_fk, eval_merit, DualMapContext};
use apd_core::linalg::{gaussian_matrix, gaussian_vector, seeded_rng};
use apd_core::model::{
    DiagonalQuadratic, FeasibleSet, LinearConstraint, ProblemInstance, ProxableFunction, Regularizer, SeparableProx,
};
use apd_core::solvers::{InnerConfig, IterateState, Scheme, Stepper};
use apd_core::{Matrix, Vector};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn soft(u: f64, t: f64) -> f64 {
    if u > t {
        u - t
    } else if u < -t {
        u + t
    } else {
        0.0
    }
}

/// Root of `θλ − r − αA·soft(z − tAᵀλ, tw) = 0` by enumerating the sign pattern
/// of every primal coordinate and solving the resulting linear system.
pub fn sign_enumeration_oracle(theta: f64, alpha: f64, t: f64, z: &Vector, r: &Vector, a: &Matrix, w: f64) -> Vector {
    let (m, n) = (a.nrows(), a.ncols());
    let mut best: Option<(f64, Vector)> = None;
    for code in 0..3usize.pow(n as u32) {
        let mut c = code;
        let sign: Vec<f64> = (0..n)
            .map(|_| {
                let s = [0.0, 1.0, -1.0][c % 3];
                c /= 3;
                s
            })
            .collect();
        // v_i = z_i − t(Aᵀλ)_i − t w s_i on active coordinates, 0 elsewhere.
        let mut lhs = Matrix::identity(m, m) * theta;
        let mut rhs = r.clone();
        for i in 0..n {
            if sign[i] != 0.0 {
                let col = a.column(i);
                lhs += col * col.transpose() * (alpha * t);
                rhs += col * (alpha * (z[i] - t * w * sign[i]));
            }
        }
        let Some(lam) = lhs.lu().solve(&rhs) else { continue };
        let u = z - a.transpose() * &lam * t;
        // Pattern consistency, measured as the worst violation.
        let viol = (0..n)
            .map(|i| match sign[i] {
                s if s > 0.0 => (t * w - u[i]).max(0.0),
                s if s < 0.0 => (u[i] + t * w).max(0.0),
                _ => (u[i].abs() - t * w).max(0.0),
            })
            .fold(0.0, f64::max);
        if best.as_ref().is_none_or(|(v, _)| viol < *v) {
            best = Some((viol, lam));
        }
    }
    best.expect("some pattern is consistent").1
}

/// One of the shipped proximable functions in dimension `n`, drawn from `rng`.
pub fn random_prox(rng: &mut ChaCha8Rng, n: usize, kind: usize) -> SeparableProx {
    let weight = rng.random_range(0.05..2.0);
    let lower = Vector::from_fn(n, |_, _| -rng.random_range(0.0..2.0));
    let upper = Vector::from_fn(n, |_, _| rng.random_range(0.0..2.0));
    let curvature = Vector::from_fn(n, |_, _| rng.random_range(0.0..3.0));
    let bx = FeasibleSet::Box { lower, upper };
    match kind % 7 {
        0 => SeparableProx::zero(),
        1 => SeparableProx::l1(weight).unwrap(),
        2 => SeparableProx::quadratic(curvature).unwrap(),
        3 => SeparableProx::new(Regularizer::Zero, bx).unwrap(),
        4 => SeparableProx::new(Regularizer::L1 { weight }, bx).unwrap(),
        5 => SeparableProx::new(Regularizer::Quadratic { curvature }, bx).unwrap(),
        _ => {
            let normal = gaussian_vector(rng, n);
            SeparableProx::half_space(normal, rng.random_range(-1.0..1.0)).unwrap()
        }
    }
}

/// Coordinate `i` of `prox_{h*/η}(v)` for `h = w|·| + δ_[l,u]` with `l ≤ 0 ≤ u`.
///
/// `h*` is 0 on `[−w, w]`, has slope `u` above `w` and slope `l` below `−w`.
fn conjugate_prox_l1_box(v: f64, eta: f64, w: f64, l: f64, u: f64) -> f64 {
    if v > w {
        w.max(v - u / eta)
    } else if v < -w {
        (-w).min(v - l / eta)
    } else {
        v
    }
}

/// Checks `x = prox_{ηg}(x) + η·prox_{g*/η}(x/η)` with an independently derived
/// conjugate prox, or the Fenchel–Young equality where that is simpler.
pub fn check_moreau(g: &SeparableProx, eta: f64, x: &Vector) -> Result<(), String> {
    let p = g.prox(eta, x).map_err(|e| e.to_string())?;
    let y = (x - &p) / eta;
    let scale = x.norm() + p.norm() + 1.0;
    let tol = 1e-12 * scale;
    let n = x.len();
    let inf = f64::INFINITY;
    let (w, lower, upper) = match (g.term(), g.set()) {
        (Regularizer::Zero, FeasibleSet::Whole) => (0.0, vec![-inf; n], vec![inf; n]),
        (Regularizer::L1 { weight }, FeasibleSet::Whole) => (*weight, vec![-inf; n], vec![inf; n]),
        (Regularizer::Zero, FeasibleSet::Box { lower, upper }) => (0.0, lower.as_slice().to_vec(), upper.as_slice().to_vec()),
        (Regularizer::L1 { weight }, FeasibleSet::Box { lower, upper }) => {
            (*weight, lower.as_slice().to_vec(), upper.as_slice().to_vec())
        }
        (Regularizer::Quadratic { curvature }, set) => {
            // Fenchel–Young: g(p) + g*(y) = ⟨p, y⟩ with g* evaluated by its own maximiser.
            let (lo, hi) = match set {
                FeasibleSet::Box { lower, upper } => (lower.clone(), upper.clone()),
                _ => (Vector::from_element(n, -inf), Vector::from_element(n, inf)),
            };
            let mut gp = 0.0;
            let mut conj = 0.0;
            for i in 0..n {
                let d = curvature[i];
                gp += 0.5 * d * p[i] * p[i];
                let xi = if d > 0.0 {
                    (y[i] / d).clamp(lo[i], hi[i])
                } else if y[i] > 0.0 {
                    hi[i]
                } else if y[i] < 0.0 {
                    lo[i]
                } else {
                    0.0
                };
                conj += if xi.is_finite() { y[i] * xi - 0.5 * d * xi * xi } else { 0.0 };
            }
            let gap = gp + conj - p.dot(&y);
            return if gap.abs() <= tol * (1.0 + y.norm()) { Ok(()) } else { Err(format!("Fenchel-Young gap {gap:e}")) };
        }
        (Regularizer::Zero, FeasibleSet::HalfSpace { normal, offset }) => {
            // y must be a nonnegative multiple of the normal, with complementarity.
            let s = y.dot(normal) / normal.norm_squared();
            let off = (&y - normal * s).norm();
            let comp = s * (normal.dot(&p) - offset);
            return if s >= -tol && off <= tol && comp.abs() <= tol * (1.0 + s.abs()) {
                Ok(())
            } else {
                Err(format!("half-space multiplier {s:e}, off-normal {off:e}, complementarity {comp:e}"))
            };
        }
        _ => return Err("unexpected prox kind".into()),
    };
    for i in 0..n {
        let q = conjugate_prox_l1_box(x[i] / eta, eta, w, lower[i], upper[i]);
        let err = (p[i] + eta * q - x[i]).abs();
        if err > tol {
            return Err(format!("coordinate {i}: decomposition error {err:e}"));
        }
    }
    Ok(())
}

/// `‖Px − Py‖² ≤ ⟨Px − Py, x − y⟩`.
pub fn check_firmness(g: &SeparableProx, eta: f64, x: &Vector, y: &Vector) -> Result<(), String> {
    let px = g.prox(eta, x).map_err(|e| e.to_string())?;
    let py = g.prox(eta, y).map_err(|e| e.to_string())?;
    let d = &px - &py;
    let lhs = d.norm_squared();
    let rhs = d.dot(&(x - y));
    if lhs <= rhs + 1e-12 * (x - y).norm_squared().max(1e-300) + 1e-14 {
        Ok(())
    } else {
        Err(format!("‖Px−Py‖² = {lhs:e} > ⟨Px−Py, x−y⟩ = {rhs:e}"))
    }
}

/// Random dual-map data: `(θ, α, t, z, r, A, g)`.
pub struct DualData {
    pub theta: f64,
    pub alpha: f64,
    pub t: f64,
    pub z: Vector,
    pub r: Vector,
    pub constraint: LinearConstraint,
    pub g: SeparableProx,
}

pub fn random_dual_data(seed: u64) -> DualData {
    let mut rng = seeded_rng(seed);
    let m = rng.random_range(1..=5);
    let n = rng.random_range(m.max(2)..=8);
    let a = gaussian_matrix(&mut rng, m, n);
    let kind = rng.random_range(0..7);
    let g = random_prox(&mut rng, n, kind);
    DualData {
        theta: rng.random_range(1e-3..2.0),
        alpha: rng.random_range(0.05..2.0),
        t: rng.random_range(0.05..2.0),
        z: gaussian_vector(&mut rng, n) * 2.0,
        r: gaussian_vector(&mut rng, m),
        constraint: LinearConstraint::dense(a, Vector::zeros(m)).unwrap(),
        g,
    }
}

impl DualData {
    pub fn ctx(&self) -> DualMapContext<'_> {
        DualMapContext::new(self.theta, self.alpha, self.t, self.z.clone(), self.r.clone(), &self.constraint, &self.g)
            .unwrap()
    }
}

/// `θ‖λ−ξ‖² ≤ ⟨F(λ)−F(ξ), λ−ξ⟩` and `‖F(λ)−F(ξ)‖ ≤ ρ‖λ−ξ‖`.
pub fn check_sandwich(seed: u64) -> Result<(), String> {
    let data = random_dual_data(seed);
    let ctx = data.ctx();
    let mut rng = seeded_rng(seed ^ 0x5a5a);
    let m = data.r.len();
    let l1 = gaussian_vector(&mut rng, m) * 3.0;
    let l2 = gaussian_vector(&mut rng, m) * 3.0;
    let f1 = eval_fk(&ctx, &l1).map_err(|e| e.to_string())?;
    let f2 = eval_fk(&ctx, &l2).map_err(|e| e.to_string())?;
    let d = &l1 - &l2;
    let df = &f1 - &f2;
    let slack = 1e-12 * (f1.norm() + f2.norm() + 1.0) * d.norm();
    let mono = df.dot(&d);
    if mono < data.theta * d.norm_squared() - slack {
        return Err(format!("monotonicity {mono:e} < θ‖d‖² = {:e}", data.theta * d.norm_squared()));
    }
    let rho = ctx.rho();
    if df.norm() > rho * d.norm() * (1.0 + 1e-12) + 1e-12 * (f1.norm() + f2.norm()) {
        return Err(format!("Lipschitz bound: {:e} > {:e}", df.norm(), rho * d.norm()));
    }
    Ok(())
}

/// Central differences of the merit match `⟨F, e⟩` to 1e-5 relative.
pub fn check_merit_gradient(seed: u64) -> Result<(), String> {
    let data = random_dual_data(seed);
    let ctx = data.ctx();
    let mut rng = seeded_rng(seed ^ 0xa5a5);
    let m = data.r.len();
    let lam = gaussian_vector(&mut rng, m);
    let dir = gaussian_vector(&mut rng, m).normalize();
    let grad = eval_fk(&ctx, &lam).map_err(|e| e.to_string())?;
    let h = 1e-5;
    let plus = eval_merit(&ctx, &(&lam + &dir * h)).map_err(|e| e.to_string())?;
    let minus = eval_merit(&ctx, &(&lam - &dir * h)).map_err(|e| e.to_string())?;
    let fd = (plus - minus) / (2.0 * h);
    let exact = grad.dot(&dir);
    // The merit is C^{1,1} with constant ρ, so central differences err by at most ρh.
    let tol = 1e-5 * exact.abs().max(grad.norm()).max(1.0) + ctx.rho() * h;
    if (fd - exact).abs() <= tol {
        Ok(())
    } else {
        Err(format!("finite difference {fd:e} vs gradient {exact:e}"))
    }
}

/// Small problem with a diagonal quadratic, an `ℓ1` term and a box containing 0.
pub fn random_box_problem(seed: u64) -> ProblemInstance {
    let mut rng = seeded_rng(seed);
    let n = rng.random_range(3..=7);
    let m = rng.random_range(1..n);
    let curv = Vector::from_fn(n, |_, _| rng.random_range(0.0..3.0));
    let lin = gaussian_vector(&mut rng, n);
    let a = gaussian_matrix(&mut rng, m, n);
    let b = gaussian_vector(&mut rng, m) * 0.3;
    let lower = Vector::from_fn(n, |_, _| -rng.random_range(0.5..2.0));
    let upper = Vector::from_fn(n, |_, _| rng.random_range(0.5..2.0));
    let g = SeparableProx::new(Regularizer::L1 { weight: rng.random_range(0.0..0.5) }, FeasibleSet::Box { lower, upper })
        .unwrap();
    ProblemInstance::new(
        Arc::new(DiagonalQuadratic::new(curv, lin).unwrap()),
        Arc::new(g),
        LinearConstraint::dense(a, b).unwrap(),
        0.0,
    )
    .unwrap()
}

/// A few steps of every scheme keep `λ − θ⁻¹(Ax − b)` fixed and the iterates in `X`.
pub fn check_scheme_invariants(seed: u64, check_invariant: bool, check_membership: bool) -> Result<(), String> {
    let p = random_box_problem(seed);
    for scheme in Scheme::ALL {
        let stepper = Stepper::new(&p, scheme, InnerConfig::default()).map_err(|e| e.to_string())?;
        let mut s = IterateState::initial(&p, 1.0).map_err(|e| e.to_string())?;
        let xi0 = s.invariant(&p);
        for _ in 0..6 {
            let alpha = stepper.step_size(&s, 1.0).map_err(|e| e.to_string())?;
            s = stepper.step(&s, alpha).map_err(|e| format!("{scheme}: {e}"))?.state;
            if check_invariant {
                let drift = (s.invariant(&p) - &xi0).norm();
                if drift > 1e-9 * xi0.norm().max(1.0) {
                    return Err(format!("{scheme}: invariant drift {drift:e} at k = {}", s.k));
                }
            }
            if check_membership {
                let inside = |x: &Vector| p.nonsmooth.contains(x, 1e-12);
                // v and y stay in X only for the forward-backward schemes.
                let fb = matches!(scheme, Scheme::SemiApdfb | Scheme::ExApdfb);
                let fb_ok = !fb || (inside(&s.v) && s.y.as_ref().is_some_and(inside));
                if !inside(&s.x) || !fb_ok {
                    return Err(format!("{scheme}: iterate left the box at k = {}", s.k));
                }
            }
        }
    }
    Ok(())
}

fn runner(cases: u32, seed: u8) -> TestRunner {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    TestRunner::new_with_rng(config, TestRng::from_seed(RngAlgorithm::ChaCha, &[seed; 32]))
}

fn lift(r: Result<(), String>) -> Result<(), TestCaseError> {
    r.map_err(TestCaseError::fail)
}

/// Runs each property `cases` times with a fixed seed; one result per property.
pub fn run_property_suite(cases: u32) -> Vec<(&'static str, Result<(), String>)> {
    let prox_input = (any::<u64>(), 0usize..7, 1usize..8, 0.01f64..10.0);
    let mut out = Vec::new();

    let r = runner(cases, 1).run(&prox_input, |(seed, kind, n, eta)| {
        let mut rng = seeded_rng(seed);
        let g = random_prox(&mut rng, n, kind);
        let x = gaussian_vector(&mut rng, n) * 3.0;
        lift(check_moreau(&g, eta, &x))
    });
    out.push(("Moreau identity", r.map_err(|e| e.to_string())));

    let r = runner(cases, 2).run(&prox_input, |(seed, kind, n, eta)| {
        let mut rng = seeded_rng(seed);
        let g = random_prox(&mut rng, n, kind);
        let x = gaussian_vector(&mut rng, n) * 3.0;
        let y = gaussian_vector(&mut rng, n) * 3.0;
        lift(check_firmness(&g, eta, &x, &y))
    });
    out.push(("prox firmness", r.map_err(|e| e.to_string())));

    let r = runner(cases, 3).run(&any::<u64>(), |seed| lift(check_sandwich(seed)));
    out.push(("F monotone-Lipschitz sandwich", r.map_err(|e| e.to_string())));

    let r = runner(cases, 4).run(&any::<u64>(), |seed| lift(check_merit_gradient(seed)));
    out.push(("merit gradient", r.map_err(|e| e.to_string())));

    let r = runner(cases, 5).run(&any::<u64>(), |seed| lift(check_scheme_invariants(seed, true, false)));
    out.push(("multiplier invariant", r.map_err(|e| e.to_string())));

    let r = runner(cases, 6).run(&any::<u64>(), |seed| lift(check_scheme_invariants(seed, false, true)));
    out.push(("X membership", r.map_err(|e| e.to_string())));

    out
}
