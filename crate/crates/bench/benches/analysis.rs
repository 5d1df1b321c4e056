use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use dynbatch::bounds;
use dynbatch::chain::{solve_finite, solve_unbounded};
use dynbatch::fit::linear_fit;
use dynbatch::SolveOptions;
use dynbatch_bench::{p4, v100};

fn closed_form(c: &mut Criterion) {
    let m = v100();
    c.bench_function("phi", |b| b.iter(|| bounds::phi(black_box(3.0), &m).unwrap()));
    c.bench_function("bounds_report", |b| {
        b.iter(|| dynbatch::BoundsReport::new(black_box(3.0), &m, None, dynbatch::BatchLimit::Unbounded).unwrap())
    });
}

fn chains(c: &mut Criterion) {
    let opts = SolveOptions::default();
    let mut g = c.benchmark_group("solve_unbounded");
    for rho in [0.1, 0.5, 0.9, 0.95] {
        g.bench_with_input(BenchmarkId::new("v100", rho), &rho, |b, &rho| {
            b.iter(|| solve_unbounded(rho / v100().alpha(), &v100(), None, &opts).unwrap())
        });
    }
    g.finish();

    let mut g = c.benchmark_group("solve_finite");
    for b_max in [8u64, 64, 512] {
        let m = p4();
        let lambda = 0.9 * m.mu_of(b_max).unwrap();
        g.bench_with_input(BenchmarkId::new("p4_0.9mu", b_max), &b_max, |b, &b_max| {
            b.iter(|| solve_finite(lambda, &m, b_max, None, &opts).unwrap())
        });
    }
    g.finish();
}

fn fitting(c: &mut Criterion) {
    let points: Vec<(u64, f64)> = (1..=1024).map(|b| (b, 0.1438 * b as f64 + 1.8874 + 1e-3 * (b % 7) as f64)).collect();
    c.bench_function("linear_fit_1024", |b| b.iter(|| linear_fit(black_box(&points)).unwrap()));
}

criterion_group!(benches, closed_form, chains, fitting);
criterion_main!(benches);
