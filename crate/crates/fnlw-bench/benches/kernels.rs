use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use fnlw_bench::fixture;
use fnlw_core::dynamics::{linear_propagate, strang_step};
use fnlw_core::field::FourierField;
use fnlw_core::measure::{sample_mu_alpha, wick_potential, SeedSpec};
use fnlw_core::wick::wick_power;

fn bench_transforms(c: &mut Criterion) {
    let mut group = c.benchmark_group("transform_round_trip");
    for cutoff in [8u32, 16, 32] {
        let (ctx, state) = fixture(cutoff, 0.9);
        let grid = ctx.grid();
        group.bench_with_input(BenchmarkId::from_parameter(grid.grid_size), &state, |b, s| {
            b.iter(|| {
                let phys = s.u.synthesize();
                black_box(FourierField::analyze(grid, &phys).unwrap())
            })
        });
    }
    group.finish();
}

fn bench_wick_power(c: &mut Criterion) {
    let mut group = c.benchmark_group("wick_power_cubic");
    for cutoff in [8u32, 16] {
        let (ctx, state) = fixture(cutoff, 0.9);
        group.bench_with_input(BenchmarkId::from_parameter(cutoff), &state, |b, s| {
            b.iter(|| black_box(wick_power(&s.u, 3, &ctx).unwrap()))
        });
    }
    group.finish();
}

fn bench_dynamics(c: &mut Criterion) {
    let mut group = c.benchmark_group("dynamics");
    for cutoff in [8u32, 16] {
        let (ctx, state) = fixture(cutoff, 0.9);
        group.bench_with_input(BenchmarkId::new("strang_step", cutoff), &state, |b, s| {
            b.iter(|| black_box(strang_step(s, 1e-3, &ctx).unwrap()))
        });
        group.bench_with_input(BenchmarkId::new("linear_propagate", cutoff), &state, |b, s| {
            b.iter(|| black_box(linear_propagate(s, 1e-3)))
        });
    }
    group.finish();
}

fn bench_sampling(c: &mut Criterion) {
    let mut group = c.benchmark_group("sampling");
    let (ctx, _) = fixture(8, 0.9);
    let grid = ctx.grid();
    group.bench_function("sample_mu_alpha_n8", |b| {
        let mut index = 0u64;
        b.iter(|| {
            index += 1;
            black_box(sample_mu_alpha(&SeedSpec::new(7, index), &grid))
        })
    });
    group.bench_function("wick_potential_n8", |b| {
        let state = sample_mu_alpha(&SeedSpec::new(7, 0), &grid);
        b.iter(|| black_box(wick_potential(&state, &ctx).unwrap()))
    });
    group.finish();
}

criterion_group!(benches, bench_transforms, bench_wick_power, bench_dynamics, bench_sampling);
criterion_main!(benches);
