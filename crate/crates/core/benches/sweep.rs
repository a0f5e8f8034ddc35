// SPDX-License-Identifier: Apache-2.0

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use lderiv::lfunc::LEngine;
use lderiv::stats::sample_family;
use lderiv::zeros::count_real_zeros;
use lderiv::{enumerate_family, par, FundamentalDiscriminant};
use std::hint::black_box;

fn members(x: f64, n: usize) -> Vec<FundamentalDiscriminant> {
    sample_family(&enumerate_family(x).unwrap(), n, 1).unwrap().members
}

fn l_prime_at(fd: &FundamentalDiscriminant) -> f64 {
    LEngine::with_defaults(fd.clone()).unwrap().l_prime(0.8).unwrap().l_prime
}

fn zero_count(fd: &FundamentalDiscriminant) -> u32 {
    let e = LEngine::with_defaults(fd.clone()).unwrap();
    count_real_zeros(&e, 0.75, 1.0, 0.01, 1e-10).unwrap().count
}

fn sweeps(c: &mut Criterion) {
    let mut g = c.benchmark_group("family_sweep");
    g.sample_size(10);
    for x in [1e4, 1e5] {
        let fds = members(x, 64);
        g.bench_with_input(BenchmarkId::new("l_prime/parallel", x), &fds, |b, fds| b.iter(|| black_box(par::map(fds, l_prime_at))));
        g.bench_with_input(BenchmarkId::new("l_prime/sequential", x), &fds, |b, fds| {
            b.iter(|| black_box(par::map_sequential(fds, l_prime_at)))
        });
    }
    let fds = members(1e4, 16);
    g.bench_function("zero_count/parallel", |b| b.iter(|| black_box(par::map(&fds, zero_count))));
    g.bench_function("zero_count/sequential", |b| b.iter(|| black_box(par::map_sequential(&fds, zero_count))));
    g.finish();
}

criterion_group!(benches, sweeps);
criterion_main!(benches);
