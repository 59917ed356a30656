//! Sequential vs parallel execution of the three data-parallel kernels:
//! Haar Monte Carlo integration, Bloch-sphere quadrature, and chunked shot
//! sampling. Both modes produce bitwise-identical results; the bench
//! measures what the `parallel` feature buys on the current machine.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use num_complex::Complex64;
use std::hint::black_box;

use mfid::exec::ExecMode;
use mfid::haar::{bloch_integrate_in, mc_integrate_in, BlochQuadrature, HaarSampler};
use mfid::metrics::{avg_fidelity_probs_in, Integrator};
use mfid::quantum::{DensityMatrix, PureState, Rank1Pvm};
use mfid::qubit::CoherentQubitPovm;
use mfid::simdevice::NoisyDevice;

const MODES: [(&str, ExecMode); 2] =
    [("sequential", ExecMode::Sequential), ("parallel", ExecMode::Parallel)];

fn family_povm() -> mfid::quantum::Povm {
    CoherentQubitPovm::new(0.95, Complex64::new(0.05, 0.03)).unwrap().povm().unwrap()
}

fn bench_mc_integrate(c: &mut Criterion) {
    let mut group = c.benchmark_group("mc_integrate");
    let sampler = HaarSampler::new(4, 12);
    let povm = {
        let pvm = Rank1Pvm::computational(4);
        let w = 0.1;
        mfid::quantum::validate_povm(
            (0..4)
                .map(|k| {
                    pvm.projector(k)
                        .scale(1.0 - w)
                        .add(&mfid::linalg::ComplexMatrix::identity(4).scale(w / 4.0))
                })
                .collect(),
        )
        .unwrap()
    };
    let f = move |psi: &PureState| Ok(povm.effect(0).expectation(psi.amplitudes()).re);
    for (name, mode) in MODES {
        group.bench_with_input(BenchmarkId::new("haar_d4_n20000", name), &mode, |b, &mode| {
            b.iter(|| mc_integrate_in(&f, &sampler, black_box(20_000), mode).unwrap())
        });
    }
    group.finish();
}

fn bench_bloch_quadrature(c: &mut Criterion) {
    let mut group = c.benchmark_group("bloch_quadrature");
    let quad = BlochQuadrature::new(128, 128);
    for (name, mode) in MODES {
        group.bench_with_input(BenchmarkId::new("smooth_128x128", name), &mode, |b, &mode| {
            b.iter(|| {
                bloch_integrate_in(
                    |theta: f64, phi: f64| (theta.sin() * phi.cos()).powi(2),
                    black_box(&quad),
                    mode,
                )
                .unwrap()
            })
        });
    }
    group.finish();
}

fn bench_exact_fidelity(c: &mut Criterion) {
    let mut group = c.benchmark_group("avg_fidelity");
    group.sample_size(20);
    let pvm = Rank1Pvm::computational(2);
    let povm = family_povm();
    let integrator = Integrator::Quadrature(BlochQuadrature::new(128, 128));
    for (name, mode) in MODES {
        group.bench_with_input(BenchmarkId::new("family_quad_128", name), &mode, |b, &mode| {
            b.iter(|| avg_fidelity_probs_in(&pvm, black_box(&povm), &integrator, mode).unwrap())
        });
    }
    group.finish();
}

fn bench_shot_sampling(c: &mut Criterion) {
    let mut group = c.benchmark_group("shot_sampling");
    let povm = family_povm();
    let input = DensityMatrix::maximally_mixed(2);
    for (name, mode) in MODES {
        group.bench_with_input(BenchmarkId::new("counts_n100000", name), &mode, |b, &mode| {
            b.iter(|| {
                let mut dev = NoisyDevice::new(povm.clone(), 7);
                dev.measure_counts_chunked(black_box(&input), 100_000, mode).unwrap()
            })
        });
    }
    group.finish();
}

criterion_group!(
    benches,
    bench_mc_integrate,
    bench_bloch_quadrature,
    bench_exact_fidelity,
    bench_shot_sampling
);
criterion_main!(benches);
