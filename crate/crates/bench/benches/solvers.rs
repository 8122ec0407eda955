use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use fa_aircomp::experiments::{run_scheme, Scheme};
use fa_aircomp::solvers::{placement_gradient, solve_beamformer, solve_positions, solve_power};
use fa_aircomp::{mse_analytic, mse_monte_carlo, BcdSettings};
use fa_aircomp_bench::Fixture;

fn closed_form_updates(c: &mut Criterion) {
    let mut group = c.benchmark_group("closed_form");
    for n in [8, 16, 32] {
        let fx = Fixture::new(10, n, 0.1);
        group.bench_with_input(BenchmarkId::new("beamformer", n), &fx, |b, fx| {
            b.iter(|| solve_beamformer(&fx.config, &fx.channels, black_box(&fx.transmit)).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("power", n), &fx, |b, fx| {
            b.iter(|| solve_power(&fx.config, &fx.channels, black_box(&fx.beamformer)).unwrap())
        });
    }
    group.finish();
}

fn objective(c: &mut Criterion) {
    let fx = Fixture::new(10, 8, 0.1);
    let sol = fx.solution();
    c.bench_function("mse_analytic", |b| {
        b.iter(|| mse_analytic(&fx.config, &fx.channels, black_box(&sol)).unwrap())
    });
    c.bench_function("placement_gradient", |b| {
        b.iter(|| {
            placement_gradient(
                &fx.config,
                &fx.transmit,
                &fx.beamformer,
                black_box(&fx.channels.positions),
            )
            .unwrap()
        })
    });
    let mut group = c.benchmark_group("monte_carlo");
    group.sample_size(10);
    group.bench_function("16k_samples", |b| {
        b.iter(|| mse_monte_carlo(&fx.config, &fx.channels, &sol, 1 << 14, black_box(3)).unwrap())
    });
    group.finish();
}

fn placement_and_descent(c: &mut Criterion) {
    let settings = BcdSettings::default();
    let fx = Fixture::new(10, 8, 0.1);
    let mut group = c.benchmark_group("descent");
    group.sample_size(10);
    group.bench_function("solve_positions", |b| {
        b.iter(|| {
            solve_positions(
                &fx.config,
                &fx.transmit,
                &fx.beamformer,
                black_box(&fx.channels.positions),
                &settings,
            )
            .unwrap()
        })
    });
    for scheme in Scheme::ALL {
        group.bench_function(BenchmarkId::new("run_scheme", scheme), |b| {
            b.iter(|| run_scheme(scheme, black_box(&fx.config), &settings).unwrap())
        });
    }
    group.finish();
}

criterion_group!(
    benches,
    closed_form_updates,
    objective,
    placement_and_descent
);
criterion_main!(benches);
