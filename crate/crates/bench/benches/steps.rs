use apd_core::ddo::{
    apd_ddo_step, aqp_step, build_ddo_problem, extra_step, extra_step_size, mixing_matrix, ApdDdoConfig, ApdDdoState,
    AqpState, AqpVariant, DdoModel, ExtraState, Graph,
};
use apd_core::flow::{integrate_flow, FlowState};
use apd_core::model::file::parse_problem;
use apd_core::model::problem::{planted_instance, PlantedSpec};
use apd_core::solvers::{InnerConfig, Stepper};
use apd_core::{IterateState, Scheme, Vector};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

fn scheme_steps(c: &mut Criterion) {
    let (p, _) = planted_instance(&PlantedSpec::quadratic(50, 20, 0.5, 5)).unwrap();
    let s0 = IterateState::initial(&p, 1.0).unwrap();
    let mut group = c.benchmark_group("scheme_step_planted_50x20");
    for scheme in [Scheme::Implicit, Scheme::SemiApd, Scheme::SemiApdfb, Scheme::ExApdfb] {
        let stepper = Stepper::new(&p, scheme, InnerConfig::default()).unwrap().with_invariant(&s0);
        group.bench_function(BenchmarkId::from_parameter(scheme.name()), |b| {
            b.iter(|| stepper.step(black_box(&s0), 1.0))
        });
    }
    group.finish();
}

fn flow(c: &mut Criterion) {
    let file = parse_problem("2 1 0\n1 1\n1\nquadratic 1 1\n").unwrap();
    let s0 = FlowState::initial(Vector::zeros(2), Vector::zeros(1), 1.0);
    c.bench_function("rk4_flow_qp1_1000_steps", |b| {
        b.iter(|| integrate_flow(&file.problem, black_box(&s0), 1e-3, 1.0))
    });
}

fn ddo_steps(c: &mut Criterion) {
    let graph = Graph::from_spec("rgg:20:0.4:1").unwrap();
    let p = build_ddo_problem(&graph, 20, DdoModel::LeastSquares { samples: 5 }, 7).unwrap();
    let mix = mixing_matrix(&graph).unwrap();
    let x0 = Vector::zeros(p.dim());
    let mut group = c.benchmark_group("ddo_step_rgg20_ls");
    let apd = ApdDdoState::new(x0.clone(), p.lipschitz());
    let cfg = ApdDdoConfig::default();
    group.bench_function("apd", |b| b.iter(|| apd_ddo_step(black_box(&apd), &p, &cfg)));
    let extra = ExtraState::new(x0.clone());
    let alpha = extra_step_size(&p, &mix);
    group.bench_function("extra", |b| b.iter(|| extra_step(black_box(&extra), &p, &mix, alpha)));
    let aqp = AqpState::new(x0);
    group.bench_function("aqp", |b| b.iter(|| aqp_step(black_box(&aqp), &p, &mix, AqpVariant::Convex)));
    group.finish();
}

criterion_group!(benches, scheme_steps, flow, ddo_steps);
criterion_main!(benches);
