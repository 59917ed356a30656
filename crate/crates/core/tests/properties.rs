//! Property-based checks of the crate's structural invariants: algebraic
//! identities between independent formulations, serialization round-trips,
//! determinism across execution modes, and monotonicity of the sampling
//! formulas.

use num_complex::Complex64;
use proptest::collection::vec;
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;

use mfid::exec::ExecMode;
use mfid::haar::{bloch_integrate_in, mc_integrate_in, BlochQuadrature, HaarSampler};
use mfid::linalg::ComplexMatrix;
use mfid::metrics::{lower_bound_probs, lower_bound_probs_expanded, BoundInputs};
use mfid::protocols::{chebyshev_trials, hoeffding_pairs, laplace_estimate};
use mfid::quantum::{state_fidelity, validate_povm, DensityMatrix, Povm, PureState, Rank1Pvm};
use mfid::qubit::{fg_gap, CoherentQubitPovm};
use mfid::simdevice::NoisyDevice;

fn random_povm(d: usize, n: usize, seed: u64) -> Povm {
    let mut rng = StdRng::seed_from_u64(seed);
    let raw: Vec<ComplexMatrix> = (0..n)
        .map(|_| {
            let g = ComplexMatrix::from_fn(d, |_, _| {
                Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
            });
            g.matmul(&g.adjoint())
        })
        .collect();
    let mut s = ComplexMatrix::zeros(d);
    for r in &raw {
        s = s.add(r);
    }
    let w = s.inv_sqrt_pd(1e-12).unwrap();
    validate_povm(raw.iter().map(|r| w.matmul(r).matmul(&w).hermitize()).collect()).unwrap()
}

fn random_pure(d: usize, seed: u64) -> PureState {
    HaarSampler::new(d, seed).sample_pure()
}

/// A family member with `|γ|` expressed as a fraction of its maximum.
fn family(u0: f64, frac: f64, arg: f64) -> CoherentQubitPovm {
    let r = frac * (u0 * (1.0 - u0)).sqrt();
    CoherentQubitPovm::new(u0, Complex64::from_polar(r, arg)).unwrap()
}

proptest! {
    /// The factored and expanded forms of the closed-form bound are the
    /// same polynomial.
    #[test]
    fn bound_forms_agree(u in vec(0.0..=1.0f64, 1..8)) {
        let inputs = BoundInputs::probs(u);
        let a = lower_bound_probs(&inputs).unwrap();
        let b = lower_bound_probs_expanded(&inputs).unwrap();
        prop_assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
    }

    /// The bound lives in `[1/(1+d), 1]` and never decreases when any
    /// single overlap improves.
    #[test]
    fn bound_range_and_monotonicity(
        u in vec(0.0..=1.0f64, 1..8),
        index: prop::sample::Index,
        bump in 0.0..=1.0f64,
    ) {
        let d = u.len();
        let base = lower_bound_probs(&BoundInputs::probs(u.clone())).unwrap();
        prop_assert!(base >= 1.0 / (1.0 + d as f64) - 1e-15);
        prop_assert!(base <= 1.0 + 1e-15);

        let k = index.index(d);
        let mut improved = u;
        improved[k] = (improved[k] + bump).min(1.0);
        let better = lower_bound_probs(&BoundInputs::probs(improved)).unwrap();
        prop_assert!(better >= base - 1e-15, "{better} < {base}");
    }

    /// The bound does not depend on how outcomes are labeled.
    #[test]
    fn bound_is_permutation_invariant(u in vec(0.0..=1.0f64, 2..8), seed: u64) {
        let base = lower_bound_probs(&BoundInputs::probs(u.clone())).unwrap();
        let mut shuffled = u;
        let mut rng = StdRng::seed_from_u64(seed);
        for i in (1..shuffled.len()).rev() {
            shuffled.swap(i, rng.random_range(0..=i));
        }
        let permuted = lower_bound_probs(&BoundInputs::probs(shuffled)).unwrap();
        prop_assert!((base - permuted).abs() <= 1e-14);
    }

    /// Stored models survive save/load bit-for-bit.
    #[test]
    fn povm_json_round_trip_is_bitwise(seed: u64, d in 2usize..=4) {
        let povm = random_povm(d, d, seed);
        let text = serde_json::to_string(&povm).unwrap();
        let back: Povm = serde_json::from_str(&text).unwrap();
        for (a, b) in povm.effects().iter().zip(back.effects()) {
            for r in 0..d {
                for c in 0..d {
                    let (x, y) = (a.get(r, c), b.get(r, c));
                    prop_assert_eq!(x.re.to_bits(), y.re.to_bits());
                    prop_assert_eq!(x.im.to_bits(), y.im.to_bits());
                }
            }
        }
    }

    /// On pure states the Uhlmann fidelity collapses to the squared
    /// overlap.
    #[test]
    fn state_fidelity_matches_pure_overlap(seed_a: u64, seed_b: u64, d in 2usize..=5) {
        let a = random_pure(d, seed_a);
        let b = random_pure(d, seed_b);
        let f = state_fidelity(&DensityMatrix::from_pure(&a), &DensityMatrix::from_pure(&b))
            .unwrap();
        let overlap: Complex64 = a
            .amplitudes()
            .iter()
            .zip(b.amplitudes())
            .map(|(x, y)| x.conj() * y)
            .sum();
        prop_assert!((f - overlap.norm_sqr()).abs() <= 1e-9, "{f} vs {}", overlap.norm_sqr());
    }

    /// Monte Carlo integration is bitwise identical across execution
    /// modes.
    #[test]
    fn mc_modes_agree_bitwise(seed: u64, d in 2usize..=4, n in 100usize..3000) {
        let sampler = HaarSampler::new(d, seed);
        let f = |psi: &PureState| Ok(psi.amplitudes()[0].norm_sqr());
        let seq = mc_integrate_in(f, &sampler, n, ExecMode::Sequential).unwrap();
        let par = mc_integrate_in(f, &sampler, n, ExecMode::Parallel).unwrap();
        prop_assert_eq!(seq.mean.to_bits(), par.mean.to_bits());
        prop_assert_eq!(seq.std_err.to_bits(), par.std_err.to_bits());
    }

    /// Bloch quadrature is bitwise identical across execution modes and
    /// integrates constants exactly.
    #[test]
    fn quadrature_modes_agree_and_normalize(c in -10.0..10.0f64, a in 0.1..3.0f64) {
        let quad = BlochQuadrature::new(48, 48);
        let f = |theta: f64, phi: f64| c + (a * theta).sin() * phi.cos();
        let seq = bloch_integrate_in(f, &quad, ExecMode::Sequential).unwrap();
        let par = bloch_integrate_in(f, &quad, ExecMode::Parallel).unwrap();
        prop_assert_eq!(seq.value.to_bits(), par.value.to_bits());

        let constant = bloch_integrate_in(|_, _| c, &quad, ExecMode::Sequential).unwrap();
        prop_assert!((constant.value - c).abs() <= 1e-12 * c.abs().max(1.0));
    }

    /// Shot sampling is reproducible and mode-independent: two devices
    /// built alike produce identical counts in either execution mode.
    #[test]
    fn shot_counts_agree_across_modes(
        seed: u64,
        u0 in 0.5..=1.0f64,
        frac in 0.0..=1.0f64,
        n in 1usize..20_000,
    ) {
        let povm = family(u0, frac, 0.0).povm().unwrap();
        let input = DensityMatrix::from_pure(&random_pure(2, seed ^ 0xABCD));
        let mut dev_a = NoisyDevice::new(povm.clone(), seed);
        let mut dev_b = NoisyDevice::new(povm, seed);
        let a = dev_a.measure_counts_chunked(&input, n, ExecMode::Sequential).unwrap();
        let b = dev_b.measure_counts_chunked(&input, n, ExecMode::Parallel).unwrap();
        prop_assert_eq!(a, b);
        prop_assert_eq!(dev_a.shots(), n as u64);
    }

    /// Laplace smoothing keeps estimates strictly inside (0, 1) and
    /// monotone in the success count.
    #[test]
    fn laplace_estimates_are_interior_and_monotone(
        trials in 1u64..100_000,
        split in 0.0..=1.0f64,
        lambda in 0.01..=5.0f64,
    ) {
        let successes = (trials as f64 * split) as u64;
        let u = laplace_estimate(successes, trials, lambda).unwrap();
        prop_assert!(u > 0.0 && u < 1.0, "{u}");
        if successes < trials {
            let more = laplace_estimate(successes + 1, trials, lambda).unwrap();
            prop_assert!(more > u);
        }
    }

    /// Trial counts grow when the accuracy target tightens or the failure
    /// budget shrinks.
    #[test]
    fn trial_counts_are_monotone(
        eps in 0.001..=0.5f64,
        factor in 1.0..=10.0f64,
        delta in 0.001..=0.5f64,
        u in 0.0..=1.0f64,
    ) {
        let tighter = chebyshev_trials(eps, delta, u).unwrap();
        let looser = chebyshev_trials(eps * factor, delta, u).unwrap();
        prop_assert!(tighter >= looser);
        let stricter = chebyshev_trials(eps, delta / factor, u).unwrap();
        prop_assert!(stricter >= tighter);

        let tighter = hoeffding_pairs(eps, delta, (0.0, 1.0)).unwrap();
        let looser = hoeffding_pairs(eps * factor, delta, (0.0, 1.0)).unwrap();
        prop_assert!(tighter >= looser);
        let stricter = hoeffding_pairs(eps, delta / factor, (0.0, 1.0)).unwrap();
        prop_assert!(stricter >= tighter);
    }

    /// The pointwise integrand gap is symmetric in the index pair, and the
    /// family's two outcome probabilities always sum to one.
    #[test]
    fn family_pointwise_identities(
        u0 in 0.5..=1.0f64,
        frac in 0.0..=1.0f64,
        arg in 0.0..std::f64::consts::TAU,
        seed: u64,
        theta in 0.0..std::f64::consts::PI,
        phi in 0.0..std::f64::consts::TAU,
    ) {
        let fam = family(u0, frac, arg);
        let povm = fam.povm().unwrap();
        let pvm = Rank1Pvm::computational(2);
        let psi = random_pure(2, seed);
        let lm = fg_gap(&pvm, &povm, 0, 1, &psi).unwrap();
        let ml = fg_gap(&pvm, &povm, 1, 0, &psi).unwrap();
        prop_assert!((lm - ml).abs() <= 1e-15);

        let r0 = fam.r0(theta, phi);
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&r0));
        let direct = povm
            .effect(1)
            .expectation(mfid::haar::bloch_state(theta, phi).amplitudes())
            .re;
        prop_assert!((r0 + direct - 1.0).abs() <= 1e-12);
    }

    /// A validated POVM reports clean diagnostics for itself.
    #[test]
    fn validated_povms_self_report_clean(seed: u64, d in 2usize..=4, extra in 0usize..=2) {
        let povm = random_povm(d, d + extra, seed);
        let diag = povm.diagnostics();
        prop_assert!(diag.worst_min_eig >= -1e-10);
        prop_assert!(diag.completeness_residual <= 1e-9);
    }
}
