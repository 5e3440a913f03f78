use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use sqbilliard::attractor::{sample_attractor, AttractorConfig};
use sqbilliard::bifurcation::{basin_of_p, GridSpec};
use sqbilliard::manifolds::homoclinic_test;
use sqbilliard::par::map_indexed;
use sqbilliard::{Execution, Lambda};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn basin_grid(c: &mut Criterion) {
    let lambda = Lambda::new(0.7).unwrap();
    let mut group = c.benchmark_group("basin_grid_120x120");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| black_box(basin_of_p(lambda, GridSpec::full(120, 120), 2_000, exec).unwrap()))
        });
    }
    group.finish();
}

fn homoclinic_scan(c: &mut Criterion) {
    let mut group = c.benchmark_group("homoclinic_scan_2000");
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| {
                let flags = map_indexed(exec, 2_000, |k| {
                    let lambda = Lambda::new(0.55 + 0.4 * k as f64 / 1999.0).unwrap();
                    homoclinic_test(lambda).map(|r| r.holds).unwrap_or(false)
                });
                black_box(flags.iter().filter(|f| **f).count())
            })
        });
    }
    group.finish();
}

fn attractor_ensemble(c: &mut Criterion) {
    let lambda = Lambda::new(0.88).unwrap();
    let cfg = AttractorConfig { n_initial: 200, n_iter: 5_000, transient: 1_000, stride: 10, seed: 1 };
    let mut group = c.benchmark_group("attractor_ensemble_200");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| black_box(sample_attractor(lambda, &cfg, exec).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, basin_grid, homoclinic_scan, attractor_ensemble);
criterion_main!(benches);
