//! Benchmarks for the hot kernels: RK4 flow, Euler-Maruyama paths, the
//! discretized action with its gradient, and action minimization.

use std::hint::black_box;

use coopstab::action::{action_gradient, minimize_action, DiscretePath, MinimizeOptions};
use coopstab::flow::integrate;
use coopstab::sde::{ensemble, simulate, SimOptions};
use coopstab::{GriffithModel, GriffithParams, NoiseSpec, OuModel, Point};
use criterion::{BenchmarkId, Criterion, Throughput};

fn griffith(r: usize, sigma: NoiseSpec) -> GriffithModel {
    let alphas = (0..r).map(|i| 0.4 + 0.1 * i as f64).collect();
    GriffithModel::new(GriffithParams::new(alphas, 2.0, sigma).unwrap())
}

fn diagonal(r: usize, s: f64) -> Point {
    Point::new(vec![s; r]).unwrap()
}

pub fn flow(c: &mut Criterion) {
    let mut group = c.benchmark_group("rk4");
    for r in [2, 5, 10] {
        let model = griffith(r, NoiseSpec::default());
        let x0 = diagonal(r, 1.5);
        group.throughput(Throughput::Elements(10_000));
        group.bench_with_input(BenchmarkId::from_parameter(r), &r, |b, _| {
            b.iter(|| integrate(&model, black_box(&x0), 10.0, 1e-3).unwrap())
        });
    }
    group.finish();
}

pub fn euler_maruyama(c: &mut Criterion) {
    let mut group = c.benchmark_group("euler_maruyama");
    group.throughput(Throughput::Elements(10_000));
    for (name, sigma) in [("const", NoiseSpec::Const { c: 1.0 }), ("linear", NoiseSpec::Linear { c: 0.5 })] {
        let model = griffith(2, sigma);
        let x0 = diagonal(2, 2.0);
        group.bench_function(name, |b| b.iter(|| simulate(&model, black_box(&x0), 0.1, 10.0, 1e-3, 7).unwrap()));
    }
    let model = griffith(2, NoiseSpec::default());
    let x0 = diagonal(2, 2.0);
    let opts = SimOptions { record_every: 1000, ..Default::default() };
    group.throughput(Throughput::Elements(16 * 10_000));
    group.bench_function("ensemble_16", |b| {
        b.iter(|| ensemble(&model, black_box(&x0), 0.1, 10.0, 1e-3, 16, 7, &opts).unwrap())
    });
    group.finish();
}

pub fn action_kernel(c: &mut Criterion) {
    let mut group = c.benchmark_group("action_gradient");
    for n in [50, 200, 800] {
        let model = griffith(2, NoiseSpec::Linear { c: 1.0 });
        let path = DiscretePath::straight(&diagonal(2, 2.0), &diagonal(2, 0.5), 10.0, n).unwrap();
        group.throughput(Throughput::Elements(n as u64));
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| action_gradient(&model, black_box(&path)).unwrap())
        });
    }
    group.finish();
}

pub fn minimization(c: &mut Criterion) {
    let mut group = c.benchmark_group("minimize_action");
    group.sample_size(10);
    let ou = OuModel::new(1.0, 1).unwrap();
    let init =
        DiscretePath::straight(&Point::new(vec![0.0]).unwrap(), &Point::new(vec![1.0]).unwrap(), 10.0, 200).unwrap();
    group.bench_function("ou_t10_n200", |b| {
        b.iter(|| minimize_action(&ou, black_box(&init), &MinimizeOptions::default()).unwrap())
    });
    let model = griffith(2, NoiseSpec::default());
    let init = DiscretePath::straight(&diagonal(2, 2.0), &diagonal(2, 0.5), 5.0, 100).unwrap();
    group.bench_function("griffith_uphill_t5_n100", |b| {
        b.iter(|| minimize_action(&model, black_box(&init), &MinimizeOptions::default()).unwrap())
    });
    group.finish();
}

pub fn benchmarks(c: &mut Criterion) {
    flow(c);
    euler_maruyama(c);
    action_kernel(c);
    minimization(c);
}
