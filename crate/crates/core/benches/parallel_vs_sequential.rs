//! Sequential against rayon execution for the hot loops. Without the
//! `parallel` feature both arms run on one thread.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fracobstacle::design::{exhaustive_oracle_with, OracleMode};
use fracobstacle::eigensolver::SolverOptions;
use fracobstacle::geometry::{Domain, Grid};
use fracobstacle::kernel::{assemble_kernel_with, Quadrature};
use fracobstacle::par::Execution;
use std::hint::black_box;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn interval(n: usize) -> Grid {
    Grid::new(Domain::interval(0.0, 1.0).unwrap(), &[n]).unwrap()
}

fn assembly(c: &mut Criterion) {
    let mut group = c.benchmark_group("assemble");
    for n in [256, 1024] {
        let grid = interval(n);
        for (name, exec) in MODES {
            group.bench_with_input(BenchmarkId::new(name, n), &grid, |b, g| {
                b.iter(|| assemble_kernel_with(g, 0.5, 2.5, Quadrature::Corrected, exec).unwrap())
            });
        }
    }
    group.finish();
}

fn energy_and_gradient(c: &mut Criterion) {
    let n = 1024;
    let grid = interval(n);
    let k = assemble_kernel_with(&grid, 0.5, 2.5, Quadrature::Midpoint, Execution::Sequential).unwrap();
    let u: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
    let mut group = c.benchmark_group("energy_gradient");
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::new("energy", name), |b| {
            b.iter(|| k.energy_with(black_box(&u), exec).unwrap())
        });
        group.bench_function(BenchmarkId::new("gradient", name), |b| {
            b.iter(|| k.gradient_with(black_box(&u), exec).unwrap())
        });
    }
    group.finish();
}

fn oracle(c: &mut Criterion) {
    let grid = interval(16);
    let k = assemble_kernel_with(&grid, 0.5, 2.0, Quadrature::Midpoint, Execution::Sequential).unwrap();
    let opts = SolverOptions::default();
    let mut group = c.benchmark_group("oracle");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::new(name, "N16_k4"), |b| {
            b.iter(|| exhaustive_oracle_with(&k, &grid, 0.25, OracleMode::Hard, &opts, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, assembly, energy_and_gradient, oracle);
criterion_main!(benches);
