use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use kzqfi::linalg::svd_truncated_matrix;
use kzqfi::model::{bond_gate, field_weights, trotter_step};
use kzqfi::tebd::apply_trotter_step;
use kzqfi::{qfi_density, EvolutionTrace, Mps, Truncation, C64};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;

fn random_state(n: usize, chi: usize) -> Mps {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    Mps::random(n, chi, &mut rng).unwrap()
}

fn svd(c: &mut Criterion) {
    let mut group = c.benchmark_group("svd_truncated");
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for dim in [32usize, 64, 128] {
        let m = Array2::from_shape_fn((dim, dim), |_| C64::new(rng.random(), rng.random()));
        group.bench_with_input(BenchmarkId::from_parameter(dim), &m, |b, m| {
            b.iter(|| svd_truncated_matrix(black_box(m.view()), dim / 2, 1e-10).unwrap())
        });
    }
    group.finish();
}

fn gate(c: &mut Criterion) {
    let mut group = c.benchmark_group("two_site_gate");
    let g = bond_gate(0.8, field_weights(32, 15), 0.02).unwrap();
    for chi in [16usize, 32, 64] {
        let psi = random_state(32, chi);
        group.bench_with_input(BenchmarkId::from_parameter(chi), &psi, |b, psi| {
            b.iter_batched(
                || psi.clone(),
                |mut psi| psi.apply_two_site_gate(g.view(), 15, Truncation::new(chi, 1e-11)).unwrap(),
                criterion::BatchSize::SmallInput,
            )
        });
    }
    group.finish();
}

fn tebd_step(c: &mut Criterion) {
    let mut group = c.benchmark_group("trotter_step");
    group.sample_size(10);
    for n in [16usize, 32, 64] {
        let step = trotter_step(n, 1.0, 0.02).unwrap();
        let psi = random_state(n, 16);
        group.bench_with_input(BenchmarkId::from_parameter(n), &psi, |b, psi| {
            b.iter_batched(
                || psi.clone(),
                |mut psi| {
                    let mut trace = EvolutionTrace::default();
                    apply_trotter_step(&mut psi, &step, Truncation::new(32, 1e-11), true, &mut trace).unwrap()
                },
                criterion::BatchSize::SmallInput,
            )
        });
    }
    group.finish();
}

fn qfi(c: &mut Criterion) {
    let psi = random_state(64, 24);
    c.bench_function("qfi_density_n64_chi24", |b| b.iter(|| qfi_density(black_box(&psi)).unwrap()));
}

criterion_group!(benches, svd, gate, tebd_step, qfi);
criterion_main!(benches);
