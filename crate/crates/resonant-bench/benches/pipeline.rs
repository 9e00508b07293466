use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;

use resonant_core::continuation::{solve_resonant, EpsSchedule};
use resonant_core::nonlinearity::{NonlinearMap, ScalarProfile};
use resonant_core::operator::{decompose, decompose_auto, SelfAdjointOperator, SpectralSplit};
use resonant_core::solver::{solve_perturbed, SolveOptions};

fn random_operator(dim: usize, seed: u64) -> SelfAdjointOperator {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = DMatrix::from_fn(dim, dim, |_, _| rng.random_range(-1.0..1.0));
    SelfAdjointOperator::new((&b + b.transpose()) * 0.5, 0.0).unwrap()
}

/// Compliant instance with a known gap: diagonal spectrum conjugated by a
/// random orthogonal matrix, linear profile above the threshold.
fn compliant_instance(dim: usize, seed: u64) -> (SpectralSplit, NonlinearMap, DVector<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut eigs = vec![-2.0, -1.0, 0.0];
    while eigs.len() < dim {
        eigs.push(rng.random_range(0.5..4.0));
    }
    let raw = DMatrix::from_fn(dim, dim, |_, _| rng.random_range(-1.0..1.0));
    let q = raw.qr().q();
    let a = &q * DMatrix::from_diagonal(&DVector::from_vec(eigs)) * q.transpose();
    let op = SelfAdjointOperator::new((&a + a.transpose()) * 0.5, 0.0).unwrap();
    let split = decompose(&op, 1e-9).unwrap();
    let c = 1.0 / (split.threshold() + 1.0);
    let n = NonlinearMap::superposition(
        ScalarProfile::linear(c).unwrap(),
        DVector::from_element(dim, 1.0),
    )
    .unwrap();
    let h = DVector::from_fn(dim, |_, _| rng.random_range(-1.0..1.0));
    (split, n, h)
}

fn bench_decompose(c: &mut Criterion) {
    let mut group = c.benchmark_group("decompose");
    for dim in [50usize, 100, 200] {
        let op = random_operator(dim, 42);
        group.bench_with_input(BenchmarkId::from_parameter(dim), &op, |b, op| {
            b.iter(|| decompose_auto(black_box(op)).unwrap());
        });
    }
    group.finish();
}

fn bench_solve_perturbed(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve_perturbed");
    for dim in [20usize, 50, 100] {
        let (split, n, h) = compliant_instance(dim, 7);
        let opts = SolveOptions::default();
        group.bench_with_input(BenchmarkId::from_parameter(dim), &dim, |b, _| {
            b.iter(|| solve_perturbed(black_box(&split), &n, &h, 0.1, &opts).unwrap());
        });
    }
    group.finish();
}

fn bench_continuation(c: &mut Criterion) {
    let mut group = c.benchmark_group("continuation");
    group.sample_size(20);
    for dim in [20usize, 50] {
        let (split, n, h) = compliant_instance(dim, 7);
        let opts = SolveOptions::default();
        let schedule = EpsSchedule {
            eps0: 0.5,
            rho: 0.3,
            k_max: 40,
        };
        group.bench_with_input(BenchmarkId::from_parameter(dim), &dim, |b, _| {
            b.iter(|| {
                solve_resonant(black_box(&split), &n, &h, schedule, 1e-9, None, &opts).unwrap()
            });
        });
    }
    group.finish();
}

criterion_group!(benches, bench_decompose, bench_solve_perturbed, bench_continuation);
criterion_main!(benches);
