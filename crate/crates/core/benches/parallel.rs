//! Sequential vs rayon execution of the grid sweep and the bootstrap loop.

use std::time::Duration;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use gar_core::estimator::{fit_covariance, goodness_of_fit_covariance, FitSettings, TuningGrid};
use gar_core::linalg::sample_covariance;
use gar_core::par::Execution;
use gar_core::simulate::{Replicate, SimDesign};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn grid_sweep(c: &mut Criterion) {
    let (p, n) = (40, 200);
    let rep = Replicate::draw(&SimDesign::baseline(p, n, 7), 0).unwrap();
    let cov = sample_covariance(&rep.data, true).unwrap();
    let grid = TuningGrid::default_for(p, n);
    let mut group = c.benchmark_group("grid_sweep_p40");
    group.sample_size(10).measurement_time(Duration::from_secs(20));
    for (name, execution) in MODES {
        let settings = FitSettings { execution, ..FitSettings::default() };
        group.bench_with_input(BenchmarkId::from_parameter(name), &settings, |b, s| {
            b.iter(|| fit_covariance(&cov, &grid, s).unwrap())
        });
    }
    group.finish();
}

fn bootstrap(c: &mut Criterion) {
    let (p, n) = (40, 200);
    let rep = Replicate::draw(&SimDesign::baseline(p, n, 7), 1).unwrap();
    let cov = sample_covariance(&rep.data, true).unwrap();
    let mut group = c.benchmark_group("bootstrap_b16_p40");
    group.sample_size(10).measurement_time(Duration::from_secs(20));
    for (name, execution) in MODES {
        let settings = FitSettings { execution, ..FitSettings::default() };
        group.bench_with_input(BenchmarkId::from_parameter(name), &settings, |b, s| {
            b.iter(|| goodness_of_fit_covariance(&cov, None, 16, 3, s).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, grid_sweep, bootstrap);
criterion_main!(benches);
