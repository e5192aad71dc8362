//! Microbenchmarks for the inner loops: STFT analysis/synthesis, one
//! Griffin-Lim iteration, the lifted forward/adjoint pair, and one
//! projected-gradient iteration.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stlift_core::*;

fn random_signal(n: usize, seed: u64) -> Signal {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Signal::new((0..n).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect()).unwrap()
}

fn bench_stft(c: &mut Criterion) {
    let mut group = c.benchmark_group("stft");
    for &n in &[16usize, 32, 64] {
        let cfg = StftConfig::hann(9, 1, n).unwrap();
        let x = random_signal(n, 1);
        group.bench_with_input(BenchmarkId::new("analysis", n), &n, |b, _| {
            b.iter(|| stft(&x, &cfg).unwrap())
        });
        let s = stft(&x, &cfg).unwrap();
        group.bench_with_input(BenchmarkId::new("ls_inverse", n), &n, |b, _| {
            b.iter(|| ls_inverse(&s, &cfg).unwrap())
        });
    }
    group.finish();
}

fn bench_griffin_lim_step(c: &mut Criterion) {
    let mut group = c.benchmark_group("griffin_lim_step");
    for &n in &[16usize, 32] {
        let cfg = StftConfig::hann(9, 1, n).unwrap();
        let x = random_signal(n, 2);
        let target = magnitude_spec(&stft(&x, &cfg).unwrap());
        let x0 = random_signal(n, 3);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| gl_step(&x0, &target, &cfg).unwrap())
        });
    }
    group.finish();
}

fn bench_lifted_ops(c: &mut Criterion) {
    let mut group = c.benchmark_group("lifted");
    for &n in &[16usize, 32] {
        let cfg = StftConfig::hann(9, 1, n).unwrap();
        let op = FrameOperator::new(&cfg, n);
        let x = LiftedMatrix::from_outer(random_signal(n, 4).samples());
        let b = op.forward(&x);
        group.bench_with_input(BenchmarkId::new("forward", n), &n, |bch, _| {
            bch.iter(|| op.forward(&x))
        });
        group.bench_with_input(BenchmarkId::new("adjoint", n), &n, |bch, _| {
            bch.iter(|| op.adjoint(&b).unwrap())
        });
        // one projected gradient iteration: gradient + step + PSD projection
        group.bench_with_input(BenchmarkId::new("pgd_iteration", n), &n, |bch, _| {
            bch.iter(|| {
                let grad = op.gradient(&x, &b, 0.1).unwrap();
                project_psd(&(x.matrix() - grad.matrix() * 1e-3)).unwrap()
            })
        });
    }
    group.finish();
}

criterion_group!(benches, bench_stft, bench_griffin_lim_step, bench_lifted_ops);
criterion_main!(benches);
