//! Grid workloads on a one-thread pool against the full pool.
//!
//! `cargo bench -p rwmlab --no-default-features` times the plain sequential
//! fallback instead; the "full" series then runs on one thread as well.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use rwmlab::diffusion::{euler_maruyama_paths, SdeConfig};
use rwmlab::rwm::esjd_curve;
use rwmlab::TargetSpec;

fn pools() -> Vec<(&'static str, rayon::ThreadPool)> {
    let full = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    [("one_thread", 1), ("full_pool", full)]
        .into_iter()
        .map(|(name, n)| (name, rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap()))
        .collect()
}

fn bench_esjd_grid(c: &mut Criterion) {
    let target = TargetSpec::beta(10.0, 10.0).unwrap();
    let ells: Vec<f64> = (1..=8).map(|i| 0.08 * i as f64).collect();
    let (d, replicas, n_steps) = (20, 4, 2_000);
    let mut group = c.benchmark_group("esjd_grid");
    group.sample_size(10);
    group.throughput(Throughput::Elements((ells.len() * replicas * n_steps * d) as u64));
    for (name, pool) in pools() {
        group.bench_with_input(BenchmarkId::from_parameter(name), &pool, |b, pool| {
            b.iter(|| pool.install(|| black_box(esjd_curve(&target, d, &ells, replicas, n_steps, 1).unwrap())))
        });
    }
    group.finish();
}

fn bench_diffusion_paths(c: &mut Criterion) {
    let target = TargetSpec::standard_gaussian();
    let cfg = SdeConfig::new(1.0, 512, 3);
    let mut group = c.benchmark_group("diffusion_paths");
    group.sample_size(10);
    group.throughput(Throughput::Elements((cfg.n_paths * cfg.n_steps()) as u64));
    for (name, pool) in pools() {
        group.bench_with_input(BenchmarkId::from_parameter(name), &pool, |b, pool| {
            b.iter(|| pool.install(|| black_box(euler_maruyama_paths(&target, 2.38, &cfg).unwrap())))
        });
    }
    group.finish();
}

criterion_group!(benches, bench_esjd_grid, bench_diffusion_paths);
criterion_main!(benches);
