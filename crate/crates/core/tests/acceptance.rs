//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line.
//!
//! Run with `cargo test -p apd-core --test acceptance -- --nocapture --test-threads 1`
//! to see the lines in order.

mod common;

use std::sync::Arc;
use std::time::{Duration, Instant};

use apd_core::ddo::{build_ddo_problem, reach_iteration, run_ddo, DdoAlgorithm, DdoModel, DdoRecord, DdoRunConfig, Graph};
use apd_core::flow::{continuous_lyapunov, integrate_flow, FlowState};
use apd_core::harness::fit::{fit_points, fit_rate, FitMode};
use apd_core::harness::robustness::{default_eps_list, robustness_rhs, run_robustness, RobustnessConfig, RobustnessMethod};
use apd_core::inner::{ssn_solve, DualMapContext, SsnConfig};
use apd_core::linalg::{gaussian_matrix, gaussian_vector, seeded_rng};
use apd_core::model::{
    planted_instance, DiagonalQuadratic, LinearConstraint, PlantedSpec, ProblemInstance, SaddlePoint, SeparableProx,
};
use apd_core::schedule::StepRule;
use apd_core::solvers::{run_solver, Scheme, SolverConfig};
use apd_core::{Matrix, Vector};
use nalgebra::Cholesky;
use rand::Rng;

fn report(id: u32, title: &str, ok: bool, detail: &str, elapsed: Duration, budget: Duration) {
    let timing = if elapsed <= budget { "" } else { " (over time budget)" };
    let verdict = if ok { "PASS" } else { "FAIL" };
    println!("criterion {id} {verdict}: {title}; {detail}; {:.2?}{timing}", elapsed);
    assert!(ok, "criterion {id} failed: {detail}");
}

fn qp1() -> (ProblemInstance, SaddlePoint) {
    let a = Matrix::from_row_slice(1, 2, &[1.0, 1.0]);
    let c = LinearConstraint::dense(a, Vector::from_element(1, 1.0)).unwrap();
    let p = ProblemInstance::smooth_only(Arc::new(DiagonalQuadratic::isotropic(2, 1.0)), c).unwrap();
    let saddle = SaddlePoint {
        x: Vector::from_element(2, 0.5),
        lambda: Vector::from_element(1, -0.5),
        objective: 0.25,
    };
    (p, saddle)
}

#[test]
fn criterion_1_continuous_decay() {
    let start = Instant::now();
    let (p, sp) = qp1();
    let s0 = FlowState::initial(Vector::zeros(2), Vector::zeros(1), 1.0);
    let h = 1e-3;
    let traj = integrate_flow(&p, &s0, h, 5.0).unwrap();
    let e: Vec<f64> = traj.iter().map(|s| continuous_lyapunov(s, &p, &sp)).collect();
    let factor = (-h).exp() * (1.0 + 1e-8);
    let bad_steps = e.windows(2).filter(|w| w[1] > w[0] * factor).count();
    let ratio = e[e.len() - 1] / e[0];
    let ok = bad_steps == 0 && ratio <= (-5f64).exp() * 1.01 && (e[0] - 0.625).abs() < 1e-15;
    let detail = format!("{bad_steps} steps above e^(-h), E(5)/E(0) = {ratio:.4e} vs e^-5 = {:.4e}", (-5f64).exp());
    report(1, "continuous Lyapunov decay on QP-1", ok, &detail, start.elapsed(), Duration::from_secs(1));
}

#[test]
fn criterion_2_implicit_contraction() {
    let start = Instant::now();
    let (p, sp) = qp1();
    let run = run_solver(&p, &SolverConfig::new(Scheme::Implicit, 1.0, 30), Some(&sp)).unwrap();
    let bad = run
        .records
        .windows(2)
        .filter(|w| w[1].lyapunov > w[0].lyapunov / 2.0 * (1.0 + 1e-9))
        .count();
    let r0 = run.certificate.unwrap().r0;
    let last = run.records[30];
    let feas_bound = 2f64.powi(-30) * r0;
    let ok = bad == 0 && last.k == 30 && (r0 - 2.618).abs() < 1e-3 && last.feasibility <= feas_bound;
    let detail = format!(
        "{bad} contraction violations, R0 = {r0:.6}, |Ax30 - b| = {:.3e} <= {feas_bound:.3e}",
        last.feasibility
    );
    report(2, "implicit scheme halves E each step", ok, &detail, start.elapsed(), Duration::from_millis(100));
}

fn random_qp(mu: f64, seed: u64) -> (ProblemInstance, SaddlePoint) {
    let mut spec = PlantedSpec::quadratic(50, 20, mu, seed);
    if mu == 0.0 {
        // A rank-deficient Hessian makes the problem merely convex.
        spec.rank = 30;
    }
    planted_instance(&spec).unwrap()
}

#[test]
fn criterion_3_semi_implicit_rates() {
    let start = Instant::now();
    let mut lines = Vec::new();
    let mut ok = true;
    for (mu, slope_max) in [(0.0, -0.9), (0.5, -1.7)] {
        let (p, sp) = random_qp(mu, 21);
        let run = run_solver(&p, &SolverConfig::new(Scheme::SemiApd, 1.0, 10_000), Some(&sp)).unwrap();
        let theta_bad = run
            .records
            .iter()
            .filter(|r| {
                let StepRule::SemiApd { op_norm } = run.rule else { unreachable!() };
                let q = 3.0 * op_norm + run.bounds.gamma_max().sqrt();
                r.theta > q / (run.bounds.gamma0.sqrt() * r.k as f64 + q) * (1.0 + 1e-12)
            })
            .count();
        let fit = fit_rate(&run.records, 0.5, FitMode::PowerLaw).unwrap();
        let convex_only = mu > 0.0 || p.mu_beta() == 0.0;
        ok &= convex_only && theta_bad == 0 && run.records.len() == 10_001 && fit.slope <= slope_max;
        lines.push(format!("mu_beta = {:.3}: theta violations {theta_bad}, slope {:.3}", p.mu(), fit.slope));
    }
    report(3, "semi-implicit theta bound and rates", ok, &lines.join(", "), start.elapsed(), Duration::from_secs(20));
}

#[test]
fn criterion_4_forward_backward_linear_rate() {
    let start = Instant::now();
    let mut rng = seeded_rng(44);
    let n = 40;
    // Curvatures in [1, 100] with both ends attained: μ = 1, L = 100.
    let mut curv: Vec<f64> = (0..n).map(|_| rng.random_range(1.0..100.0)).collect();
    curv[0] = 1.0;
    curv[1] = 100.0;
    let lin = gaussian_vector(&mut rng, n);
    let a = gaussian_matrix(&mut rng, 15, n) / (n as f64).sqrt();
    let x_star_guess = gaussian_vector(&mut rng, n);
    let b = &a * &x_star_guess;
    let c = LinearConstraint::dense(a, b).unwrap();
    let p = ProblemInstance::smooth_only(
        Arc::new(DiagonalQuadratic::new(Vector::from_vec(curv), lin).unwrap()),
        c,
    )
    .unwrap();
    let sp = apd_core::model::solve_reference_saddle(&p).unwrap();
    let gamma0 = 1.0;
    let run = run_solver(&p, &SolverConfig::new(Scheme::SemiApdfb, gamma0, 250), Some(&sp)).unwrap();
    let l_beta = p.l_beta();
    let gamma_min = gamma0.min(p.mu_beta());
    let q = (gamma_min / l_beta).sqrt();
    let bad = run
        .records
        .iter()
        .filter(|r| r.theta > (1.0 + q).powf(-(r.k as f64)) * (1.0 + 1e-12))
        .count();
    let fit = fit_rate(&run.records, 0.5, FitMode::Linear).unwrap();
    let slope_max = (1.0f64 / 1.1).ln() * 0.9;
    let ok = (l_beta / gamma_min - 100.0).abs() < 1e-9 && bad == 0 && fit.slope <= slope_max;
    let detail = format!(
        "L/gamma_min = {:.3}, theta violations {bad}, linear slope {:.4} <= {slope_max:.4} over {} points",
        l_beta / gamma_min,
        fit.slope,
        fit.points
    );
    report(4, "semi-implicit forward-backward linear rate", ok, &detail, start.elapsed(), Duration::from_secs(5));
}

#[test]
fn criterion_5_explicit_forward_backward_rates() {
    let start = Instant::now();
    let mut lines = Vec::new();
    let mut ok = true;
    for (mu, slope_max) in [(0.0, -0.9), (0.5, -1.7)] {
        let mut spec = PlantedSpec::quadratic(50, 20, mu, 31);
        spec.l1_weight = Some(0.1);
        if mu == 0.0 {
            spec.rank = 30;
        }
        let (p, sp) = planted_instance(&spec).unwrap();
        let run = run_solver(&p, &SolverConfig::new(Scheme::ExApdfb, 1.0, 4000), Some(&sp)).unwrap();
        let e0 = run.records[0].lyapunov;
        let floor = 64.0 * f64::EPSILON * e0.max(1.0);
        let bad = run
            .records
            .windows(2)
            .filter(|w| w[1].lyapunov > w[0].lyapunov / (1.0 + w[1].alpha) * (1.0 + 1e-9) + floor)
            .count();
        let fit = fit_rate(&run.records, 0.5, FitMode::PowerLaw).unwrap();
        ok &= bad == 0 && fit.slope <= slope_max && (p.mu_beta() == 0.0) == (mu == 0.0);
        lines.push(format!("mu_beta = {:.3}: contraction violations {bad}, slope {:.3}", p.mu_beta(), fit.slope));
    }
    report(5, "explicit forward-backward on an l1 problem", ok, &lines.join(", "), start.elapsed(), Duration::from_secs(10));
}

/// Solution of the one-dimensional dual equation by grid search and bisection.
fn scalar_oracle(theta: f64, alpha: f64, t: f64, z: &Vector, r: f64, a: &Vector, w: f64) -> f64 {
    let f = |l: f64| {
        let v: f64 = (0..z.len())
            .map(|i| {
                let u = z[i] - t * a[i] * l;
                a[i] * common::soft(u, t * w)
            })
            .sum();
        theta * l - r - alpha * v
    };
    // F is increasing with slope ≥ θ, so the root lies within |F(0)|/θ of 0.
    let radius = f(0.0).abs() / theta + 1.0;
    let grid = 2000;
    let mut lo = -radius;
    let step = 2.0 * radius / grid as f64;
    for i in 0..grid {
        let x = -radius + i as f64 * step;
        if f(x) <= 0.0 && f(x + step) >= 0.0 {
            lo = x;
            break;
        }
    }
    let (mut a_, mut b_) = (lo, lo + step);
    for _ in 0..200 {
        let mid = 0.5 * (a_ + b_);
        if f(mid) < 0.0 {
            a_ = mid;
        } else {
            b_ = mid;
        }
    }
    0.5 * (a_ + b_)
}

#[test]
fn criterion_6_semismooth_newton() {
    let start = Instant::now();
    let mut rng = seeded_rng(66);
    let mut worst_err: f64 = 0.0;
    let mut worst_ratio: f64 = 0.0;
    let mut failures = 0;
    for case in 0..50 {
        let m = if case % 2 == 0 { 1 } else { 5 };
        let n = if m == 1 { 8 } else { 6 };
        let a = gaussian_matrix(&mut rng, m, n);
        let z = gaussian_vector(&mut rng, n) * 2.0;
        let r = gaussian_vector(&mut rng, m);
        let theta = rng.random_range(1e-3..1.0);
        let alpha = rng.random_range(0.1..2.0);
        let t = rng.random_range(0.1..2.0);
        let w = rng.random_range(0.1..1.5);
        let c = LinearConstraint::dense(a.clone(), Vector::zeros(m)).unwrap();
        let g = SeparableProx::l1(w).unwrap();
        let ctx = DualMapContext::new(theta, alpha, t, z.clone(), r.clone(), &c, &g).unwrap();
        let cfg = SsnConfig { tol: 1e-12, ..SsnConfig::default() };
        let out = ssn_solve(&ctx, &Vector::zeros(m), &cfg).unwrap();
        let oracle = if m == 1 {
            Vector::from_element(1, scalar_oracle(theta, alpha, t, &z, r[0], &a.row(0).transpose(), w))
        } else {
            common::sign_enumeration_oracle(theta, alpha, t, &z, &r, &a, w)
        };
        let err = (&out.lambda - &oracle).norm() / oracle.norm().max(1.0);
        worst_err = worst_err.max(err);
        // Superlinear tail: the last nontrivial contraction factor of ‖F‖.
        let h = &out.residual_history;
        let ratio = if h.len() >= 2 && h[h.len() - 2] > 0.0 { h[h.len() - 1] / h[h.len() - 2] } else { 0.0 };
        worst_ratio = worst_ratio.max(ratio);
        if !out.converged || err > 1e-6 || ratio >= 0.1 {
            failures += 1;
        }
    }
    let ok = failures == 0;
    let detail = format!("{failures}/50 failures, worst relative error {worst_err:.2e}, worst final ratio {worst_ratio:.2e}");
    report(6, "semismooth Newton on 1-D and 5-D l1 subproblems", ok, &detail, start.elapsed(), Duration::from_secs(5));
}

#[test]
fn criterion_7_augmented_robustness() {
    let start = Instant::now();
    let graph = Graph::random_geometric(100, 0.2, 7).unwrap();
    let methods = vec![
        RobustnessMethod::parse("pcg_jacobi").unwrap(),
        RobustnessMethod::parse("plain_jacobi").unwrap(),
    ];
    let mut cfg = RobustnessConfig::new(graph.clone(), default_eps_list(), methods);
    cfg.seed = 3;
    let rows = run_robustness(&cfg).unwrap();
    let pcg: Vec<usize> = rows.iter().filter(|r| r.system == "augmented").map(|r| r.iterations).collect();
    let pcg_ok = rows.iter().filter(|r| r.system == "augmented").all(|r| r.converged);
    let (lo, hi) = (*pcg.iter().min().unwrap(), *pcg.iter().max().unwrap());
    let plain_capped = rows
        .iter()
        .filter(|r| r.system == "plain" && r.eps <= 1e-4 * (1.0 + 1e-12))
        .all(|r| !r.converged && r.iterations >= cfg.max_iter);

    // Recovered solutions against a dense Cholesky solve.
    let lap = apd_core::ddo::graph_laplacian(&graph).unwrap();
    let dense = lap.to_dense();
    let op = apd_core::inner::ConsensusOperator::new(&lap, 1);
    let s = robustness_rhs(graph.nodes(), cfg.seed);
    let mut worst: f64 = 0.0;
    for &eps in &cfg.eps {
        let out = apd_core::inner::augmented_consensus_solve(
            &op,
            eps,
            &s,
            apd_core::inner::ConsensusMethod::PcgJacobi,
            1e-10,
            cfg.max_iter,
            None,
        )
        .unwrap();
        let m = &dense + Matrix::identity(100, 100) * eps;
        let v = Cholesky::new(m).unwrap().solve(&s);
        worst = worst.max((&out.v - &v).norm() / v.norm());
    }
    let ok = pcg_ok && hi <= 2 * lo && plain_capped && worst <= 1e-6;
    let detail = format!(
        "pcg_jacobi iterations {lo}..{hi}, plain Jacobi capped for eps <= 1e-4: {plain_capped}, worst dense mismatch {worst:.2e}"
    );
    report(7, "augmented consensus solver robustness in eps", ok, &detail, start.elapsed(), Duration::from_secs(30));
}

fn ddo_runs(model: DdoModel, max_iter: usize) -> Vec<(DdoAlgorithm, Vec<DdoRecord>)> {
    let graph = Graph::random_geometric(20, 0.4, 1).unwrap();
    let p = build_ddo_problem(&graph, 20, model, 7).unwrap();
    let (_, fstar) = p.centralized_minimizer().unwrap();
    DdoAlgorithm::ALL
        .iter()
        .map(|&alg| {
            let run = run_ddo(&p, &DdoRunConfig::new(alg, max_iter), fstar).unwrap();
            (alg, run.records)
        })
        .collect()
}

#[test]
fn criterion_8_decentralized_comparison() {
    let start = Instant::now();
    let ls = ddo_runs(DdoModel::LeastSquares { samples: 5 }, 3000);
    let reach: Vec<Option<usize>> = ls.iter().map(|(_, r)| reach_iteration(r, 1e-6)).collect();
    let apd = reach[0];
    let beats = |other: Option<usize>| match (apd, other) {
        (Some(a), Some(o)) => a < o,
        (Some(_), None) => true,
        _ => false,
    };
    let ls_ok = apd.is_some() && beats(reach[1]) && beats(reach[2]);

    let lg = ddo_runs(DdoModel::Logistic { ridge: 0.5 }, 3000);
    let pts = |r: &[DdoRecord]| r.iter().map(|x| (x.k as f64, x.obj_gap)).collect::<Vec<_>>();
    let apd_fit = fit_points(&pts(&lg[0].1), 0.5, FitMode::Linear).unwrap();
    let aqp_fit = fit_points(&pts(&lg[2].1), 0.5, FitMode::PowerLaw).unwrap();
    let lg_ok = apd_fit.slope < -0.01 && aqp_fit.slope >= -2.5;
    let ok = ls_ok && lg_ok;
    let detail = format!(
        "least squares reach 1e-6 at apd {:?}, extra {:?}, aqp {:?}; logistic apd linear slope {:.4}, aqp power slope {:.3}",
        reach[0], reach[1], reach[2], apd_fit.slope, aqp_fit.slope
    );
    report(8, "decentralized APD against Extra and AQP", ok, &detail, start.elapsed(), Duration::from_secs(60));
}

#[test]
fn criterion_9_property_suite() {
    let start = Instant::now();
    let results = common::run_property_suite(1000);
    let failed: Vec<String> = results
        .iter()
        .filter_map(|(name, r)| r.as_ref().err().map(|e| format!("{name}: {e}")))
        .collect();
    let names: Vec<&str> = results.iter().map(|(n, _)| *n).collect();
    let detail = if failed.is_empty() {
        format!("1000 cases each for {}", names.join(", "))
    } else {
        failed.join("; ")
    };
    report(9, "oracle and property suite", failed.is_empty(), &detail, start.elapsed(), Duration::from_secs(10));
}
