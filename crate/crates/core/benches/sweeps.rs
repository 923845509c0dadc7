//! Grid sweeps on one worker versus the default rayon pool.
//!
//! Built without the `parallel` feature both variants run the sequential
//! fallback, which makes the overhead of the pool visible.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use quantcurv::sphere::{
    build_projector, curvature_commutator, tangent_structure, HamiltonianField, SphereGrid,
    TangentMethod,
};

fn pools() -> Vec<(&'static str, rayon::ThreadPool)> {
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let default = rayon::ThreadPoolBuilder::new().build().unwrap();
    vec![("sequential", single), ("parallel", default)]
}

fn tangent_sweep(c: &mut Criterion) {
    let (h1, _) = HamiltonianField::standard_pair();
    let grid = SphereGrid::for_level(32);
    let mut group = c.benchmark_group("tangent_structure/N32");
    for (name, pool) in pools() {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| pool.install(|| tangent_structure(&h1, &grid, TangentMethod::Analytic).unwrap()))
        });
    }
    group.finish();
}

fn curvature_sweep(c: &mut Criterion) {
    let (h1, h2) = HamiltonianField::standard_pair();
    let space = build_projector(16, &SphereGrid::for_level(16)).unwrap();
    let mut group = c.benchmark_group("curvature_commutator/N16");
    group.sample_size(20);
    for (name, pool) in pools() {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| pool.install(|| curvature_commutator(&h1, &h2, &space)))
        });
    }
    group.finish();
}

criterion_group!(benches, tangent_sweep, curvature_sweep);
criterion_main!(benches);
