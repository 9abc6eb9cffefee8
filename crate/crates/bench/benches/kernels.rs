use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use edgespin::{
    build_d, build_h0, build_h_prime, diagonalize, sector_diagonalize, EvolutionPlan, KappaVector,
    ModelParams, StateVector,
};

fn model(n: usize) -> ModelParams {
    ModelParams::new(n, 0.5).expect("valid params")
}

fn operator_kernels(c: &mut Criterion) {
    let mut group = c.benchmark_group("operator");
    for n in [8usize, 10, 12] {
        let p = model(n);
        let h = build_h0(&p).unwrap();
        let d = build_d(&p).unwrap();
        let psi = StateVector::basis(n, 0).unwrap();
        group.bench_with_input(BenchmarkId::new("to_dense_h0", n), &h, |b, h| {
            b.iter(|| h.to_dense().unwrap())
        });
        group.bench_with_input(BenchmarkId::new("apply_d", n), &psi, |b, psi| {
            b.iter(|| d.apply(black_box(psi)).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("build_d", n), &p, |b, p| {
            b.iter(|| build_d(black_box(p)).unwrap())
        });
    }
    group.finish();
}

fn spectral_kernels(c: &mut Criterion) {
    let mut group = c.benchmark_group("spectral");
    group.sample_size(10);
    for n in [8usize, 10] {
        let h = build_h0(&model(n)).unwrap();
        group.bench_with_input(BenchmarkId::new("diagonalize", n), &h, |b, h| {
            b.iter(|| diagonalize(h).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("sector_diagonalize", n), &h, |b, h| {
            b.iter(|| sector_diagonalize(h).unwrap())
        });
    }
    group.finish();
}

fn evolution_kernels(c: &mut Criterion) {
    let mut group = c.benchmark_group("evolution");
    group.sample_size(10);
    let n = 10;
    let p = model(n);
    let h = build_h_prime(&p, &KappaVector::new(0.05, 0.1, 0.0)).unwrap();
    let plan = EvolutionPlan::new(&h).unwrap();
    let psi = plan.spectrum().eigenvector(0);
    let times: Vec<f64> = (0..1000).map(|k| 0.1 * k as f64).collect();
    group.bench_function("evolve_single", |b| {
        b.iter(|| plan.evolve(black_box(&psi), 12.5).unwrap())
    });
    group.bench_function("return_amplitudes_1000", |b| {
        b.iter(|| plan.return_amplitudes(black_box(&psi), &times).unwrap())
    });
    group.finish();
}

criterion_group!(
    benches,
    operator_kernels,
    spectral_kernels,
    evolution_kernels
);
criterion_main!(benches);
