use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use iaswarm::cpso::{cpso_iteration, init_cpso};
use iaswarm::harness::{execute, Algorithm, ExperimentConfig};
use iaswarm::rng::{stream_rng, Stream};
use iaswarm::swarm::SwarmState;
use iaswarm::{generate_channels, make_problem, Execution, LeakageObjective, OmegaMode, PsoConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const MODES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

fn leakage(c: &mut Criterion) {
    let mut group = c.benchmark_group("leakage");
    for k in [3, 5, 7] {
        let spec = iaswarm::ProblemSpec::new(k, 5, 5, 2, iaswarm::Properness::Allow).unwrap();
        let ch = generate_channels(&spec, 1);
        let obj = LeakageObjective::new(&spec, &ch).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x: Vec<f64> = (0..spec.dim_real()).map(|_| rng.random_range(-1.0..1.0)).collect();
        group.bench_with_input(BenchmarkId::from_parameter(k), &x, |b, x| {
            b.iter(|| obj.evaluate(black_box(x)))
        });
    }
    group.finish();
}

fn pso_step(c: &mut Criterion) {
    let spec = make_problem(3, 5, 5, 2).unwrap();
    let ch = generate_channels(&spec, 1);
    let obj = LeakageObjective::new(&spec, &ch).unwrap();
    let cost = |x: &[f64]| obj.evaluate(x);
    let mut group = c.benchmark_group("pso_step_k3_swarm100");
    for (name, exec) in MODES {
        let mut cfg = PsoConfig::new(100, OmegaMode::Fixed(3.0), 1);
        cfg.execution = exec;
        let mut rng = stream_rng(3, Stream::Optimizer);
        let mut state = SwarmState::init(spec.dim_real(), &cost, &cfg, &mut rng).unwrap();
        group.bench_function(name, |b| b.iter(|| state.step(&cost, &cfg, &mut rng).unwrap()));
    }
    group.finish();
}

fn cpso_sweep(c: &mut Criterion) {
    let spec = make_problem(3, 5, 5, 2).unwrap();
    let ch = generate_channels(&spec, 1);
    let obj = LeakageObjective::new(&spec, &ch).unwrap();
    let mut group = c.benchmark_group("cpso_iteration_k3_swarm50");
    for (name, exec) in MODES {
        let mut cfg = PsoConfig::new(50, OmegaMode::Fixed(1e-3), 1);
        cfg.execution = exec;
        let mut rng = stream_rng(3, Stream::Optimizer);
        let mut state = init_cpso(&obj, &cfg, &mut rng).unwrap();
        group.bench_function(name, |b| {
            b.iter(|| cpso_iteration(&mut state, &obj, &cfg, &mut rng).unwrap())
        });
    }
    group.finish();
}

fn campaign(c: &mut Criterion) {
    let mut group = c.benchmark_group("campaign_k3_pso_4x50");
    group.sample_size(10);
    for (name, exec) in MODES {
        let mut cfg = ExperimentConfig::paper(3, Algorithm::Pso);
        cfg.runs = 4;
        cfg.max_iters = 50;
        cfg.execution = exec;
        group.bench_function(name, |b| b.iter(|| execute(&cfg).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, leakage, pso_step, cpso_sweep, campaign);
criterion_main!(benches);
