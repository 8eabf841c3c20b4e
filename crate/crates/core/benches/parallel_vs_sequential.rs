use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use trsvr::drivers::{self, RunConfig};
use trsvr::estimators;
use trsvr::problem::full_gradient_with;
use trsvr::problems::{make_logistic, synth_data, LinearModelProblem, SynthKind};
use trsvr::Exec;

const MODES: [(&str, Exec); 2] = [
    ("sequential", Exec::Sequential),
    ("parallel", Exec::Parallel),
];

fn logistic(n: usize, d: usize) -> LinearModelProblem {
    let data = synth_data(11, n, d, SynthKind::SeparableLogistic, 0.05).unwrap();
    make_logistic(data, 1e-3).unwrap()
}

fn full_gradients(c: &mut Criterion) {
    let mut group = c.benchmark_group("full_gradient");
    for n in [1_000, 20_000] {
        for (name, exec) in MODES {
            let p = logistic(n, 50).with_exec(exec);
            let x = vec![0.01; 50];
            group.bench_with_input(BenchmarkId::new(name, n), &n, |b, _| {
                b.iter(|| full_gradient_with(exec, &p, black_box(&x)).unwrap())
            });
        }
    }
    group.finish();
}

fn enumeration(c: &mut Criterion) {
    let mut group = c.benchmark_group("exact_moments");
    let p = logistic(16, 8);
    let xs = vec![0.3; 8];
    let x0 = vec![-0.1; 8];
    for (name, exec) in MODES {
        group.bench_function(name, |b| {
            b.iter(|| {
                estimators::exact_estimator_moments(&p, &xs, &x0, 4, 1_000_000, exec).unwrap()
            })
        });
    }
    group.finish();
}

fn seed_sweep(c: &mut Criterion) {
    let mut group = c.benchmark_group("seed_sweep");
    group.sample_size(10);
    let p = logistic(200, 10);
    let seeds: Vec<u64> = (0..16).collect();
    for (name, exec) in MODES {
        let cfg = RunConfig {
            batch_size: 8,
            inner_iters: 10,
            outer_iters: 5,
            exec,
            ..RunConfig::default()
        };
        group.bench_function(name, |b| b.iter(|| drivers::run_seeds(&p, &cfg, &seeds)));
    }
    group.finish();
}

criterion_group!(benches, full_gradients, enumeration, seed_sweep);
criterion_main!(benches);
