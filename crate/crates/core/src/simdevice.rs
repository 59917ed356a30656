//! The simulated noisy measurement apparatus.
//!
//! A [`NoisyDevice`] owns a POVM, optionally a list of state-independent
//! output states `ρ_k`, and a seeded RNG. Measuring an input `σ` draws an
//! outcome from `r_k = tr(E_k σ)` by inverse-CDF over a Kahan-summed
//! cumulative (exact at double precision for the dimensions in scope).
//! Negative probabilities no larger than 1e-9 in magnitude are rounding
//! noise and get clipped and renormalized; anything worse is a hard error.
//!
//! A device is not shareable while sampling (it owns its RNG); batch
//! helpers instead fan out over [`NoisyDevice::clone_with_substream`]
//! children keyed by a 64-bit stream mix, so chunked batches are
//! reproducible and independent of thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::exec::{map_chunks, ExecMode};
use crate::quantum::{DensityMatrix, Povm, PureState};
use crate::{Error, Result};

const BATCH_CHUNK: usize = 8192;

/// SplitMix64-style stream composition; collisions are negligible for any
/// practical nesting of batches and sub-streams.
fn compose_stream(parent: u64, sub: u64) -> u64 {
    let mut z = parent ^ sub.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One measurement event: the outcome index and, when the device emits
/// output states, the post-measurement state `ρ_outcome`.
#[derive(Clone, Debug)]
pub struct OutcomeRecord {
    pub outcome: usize,
    pub post_state: Option<DensityMatrix>,
}

/// A noisy measurement device: POVM, optional output states, seeded RNG,
/// and a shot counter tracking every sampled outcome.
#[derive(Clone, Debug)]
pub struct NoisyDevice {
    povm: Povm,
    output_states: Option<Vec<DensityMatrix>>,
    seed: u64,
    stream: u64,
    rng: ChaCha8Rng,
    shots: u64,
    batch_counter: u64,
}

impl NoisyDevice {
    pub fn new(povm: Povm, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(0);
        Self { povm, output_states: None, seed, stream: 0, rng, shots: 0, batch_counter: 0 }
    }

    /// Adds one output state per effect; outcome `k` leaves the system in
    /// `ρ_k` regardless of the input.
    pub fn with_output_states(povm: Povm, states: Vec<DensityMatrix>, seed: u64) -> Result<Self> {
        if states.len() != povm.n_effects() {
            return Err(Error::DimMismatch { expected: povm.n_effects(), found: states.len() });
        }
        for rho in &states {
            if rho.dim() != povm.dim() {
                return Err(Error::DimMismatch { expected: povm.dim(), found: rho.dim() });
            }
        }
        let mut dev = Self::new(povm, seed);
        dev.output_states = Some(states);
        Ok(dev)
    }

    pub fn dim(&self) -> usize {
        self.povm.dim()
    }

    pub fn povm(&self) -> &Povm {
        &self.povm
    }

    pub fn output_states(&self) -> Option<&[DensityMatrix]> {
        self.output_states.as_deref()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Total outcomes sampled so far (first and repeat measurements alike).
    pub fn shots(&self) -> u64 {
        self.shots
    }

    pub fn reset_shots(&mut self) {
        self.shots = 0;
    }

    /// An independent device on sub-stream `sub` of this device's stream,
    /// with a fresh shot counter.
    pub fn clone_with_substream(&self, sub: u64) -> Self {
        let stream = compose_stream(self.stream, sub);
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        Self {
            povm: self.povm.clone(),
            output_states: self.output_states.clone(),
            seed: self.seed,
            stream,
            rng,
            shots: 0,
            batch_counter: 0,
        }
    }

    /// Outcome distribution for `input` after the clipping policy: negatives
    /// within −1e-9 are clipped to zero and the vector renormalized; larger
    /// violations (or a total off from 1 by more than 1e-9) are errors.
    pub fn outcome_distribution(&self, input: &DensityMatrix) -> Result<Vec<f64>> {
        if input.dim() != self.dim() {
            return Err(Error::DimMismatch { expected: self.dim(), found: input.dim() });
        }
        let raw = self.povm.outcome_probabilities(input);
        let worst = raw.iter().fold(0.0f64, |acc, &p| acc.max(-p).max(p - 1.0));
        if worst > 1e-9 {
            return Err(Error::BadDistribution { residual: worst });
        }
        let clipped: Vec<f64> = raw.iter().map(|&p| p.clamp(0.0, 1.0)).collect();
        let total: f64 = clipped.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::BadDistribution { residual: (total - 1.0).abs() });
        }
        Ok(clipped.iter().map(|&p| p / total).collect())
    }

    /// Inverse-CDF draw over `probs` with a Kahan-summed cumulative.
    fn sample_index(rng: &mut ChaCha8Rng, probs: &[f64]) -> usize {
        let x: f64 = rng.random();
        let mut cum = 0.0;
        let mut comp = 0.0;
        for (k, &p) in probs.iter().enumerate() {
            let y = p - comp;
            let t = cum + y;
            comp = (t - cum) - y;
            cum = t;
            if x < cum {
                return k;
            }
        }
        probs.len() - 1
    }

    /// One measurement of `input`.
    pub fn measure(&mut self, input: &DensityMatrix) -> Result<OutcomeRecord> {
        let probs = self.outcome_distribution(input)?;
        let outcome = Self::sample_index(&mut self.rng, &probs);
        self.shots += 1;
        let post_state = self.output_states.as_ref().map(|states| states[outcome].clone());
        Ok(OutcomeRecord { outcome, post_state })
    }

    /// Measures `input`, then measures again on the emitted output state.
    /// The second outcome is present whenever output states are configured
    /// (their absence is the error case).
    pub fn measure_sequential(&mut self, input: &DensityMatrix) -> Result<(usize, Option<usize>)> {
        let states = self.output_states.clone().ok_or(Error::NoOutputStates)?;
        let first = self.measure(input)?.outcome;
        let probs = self.outcome_distribution(&states[first])?;
        let second = Self::sample_index(&mut self.rng, &probs);
        self.shots += 1;
        Ok((first, Some(second)))
    }

    /// `n` measurements of the same input on this device's own RNG,
    /// returned as per-outcome counts. The distribution is computed once.
    pub fn measure_counts(&mut self, input: &DensityMatrix, n: usize) -> Result<Vec<u64>> {
        let probs = self.outcome_distribution(input)?;
        let mut counts = vec![0u64; probs.len()];
        for _ in 0..n {
            counts[Self::sample_index(&mut self.rng, &probs)] += 1;
        }
        self.shots += n as u64;
        Ok(counts)
    }

    /// Chunked batch of `n` measurements over sub-stream children; the
    /// result is identical in both execution modes and independent of the
    /// parent RNG position.
    pub fn measure_counts_chunked(
        &mut self,
        input: &DensityMatrix,
        n: usize,
        mode: ExecMode,
    ) -> Result<Vec<u64>> {
        let probs = self.outcome_distribution(input)?;
        self.batch_counter += 1;
        let base = compose_stream(self.stream, self.batch_counter);
        let n_chunks = n.div_ceil(BATCH_CHUNK);
        let seed = self.seed;
        let bins = probs.len();
        let partials = map_chunks(n_chunks, mode, |ci| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(compose_stream(base, ci as u64));
            let lo = ci * BATCH_CHUNK;
            let hi = n.min(lo + BATCH_CHUNK);
            let mut counts = vec![0u64; bins];
            for _ in lo..hi {
                counts[Self::sample_index(&mut rng, &probs)] += 1;
            }
            counts
        });
        let mut counts = vec![0u64; bins];
        for part in partials {
            for (acc, c) in counts.iter_mut().zip(part) {
                *acc += c;
            }
        }
        self.shots += n as u64;
        Ok(counts)
    }
}

/// Extension point for sequential measurement backends. The shipped
/// [`NoisyDevice`] is state-independent; test harnesses can implement this
/// with devices whose output states depend on the input, which is exactly
/// what [`probe_state_dependence`] is for.
pub trait SequentialMeasure {
    fn dim(&self) -> usize;
    fn measure_sequential(&mut self, input: &DensityMatrix) -> Result<(usize, Option<usize>)>;
}

impl SequentialMeasure for NoisyDevice {
    fn dim(&self) -> usize {
        NoisyDevice::dim(self)
    }

    fn measure_sequential(&mut self, input: &DensityMatrix) -> Result<(usize, Option<usize>)> {
        NoisyDevice::measure_sequential(self, input)
    }
}

/// Result of a state-dependence probe on outcome `k`: conditioned repeat
/// frequencies for the two inputs and the z-score of their difference under
/// pooled binomial variance.
#[derive(Clone, Copy, Debug)]
pub struct ProbeReport {
    pub q1: f64,
    pub q2: f64,
    pub z_score: f64,
    pub conditioned_1: usize,
    pub conditioned_2: usize,
}

/// Estimates the conditional repeat probability of outcome `k` for two
/// different input states and reports whether they differ. A device with
/// state-independent output states gives `|z| ≲ 4`; no pass/fail threshold
/// is imposed here.
pub fn probe_state_dependence<M: SequentialMeasure + ?Sized>(
    dev: &mut M,
    psi1: &PureState,
    psi2: &PureState,
    k: usize,
    shots: usize,
) -> Result<ProbeReport> {
    let mut stats = [(0usize, 0usize); 2]; // (conditioned, repeats)
    for (slot, psi) in [psi1, psi2].into_iter().enumerate() {
        let input = DensityMatrix::from_pure(psi);
        for _ in 0..shots {
            let (first, second) = dev.measure_sequential(&input)?;
            if first == k {
                stats[slot].0 += 1;
                if second == Some(k) {
                    stats[slot].1 += 1;
                }
            }
        }
        if stats[slot].0 < 100 {
            return Err(Error::InsufficientConditionedSamples { needed: 100, got: stats[slot].0 });
        }
    }
    let (n1, s1) = stats[0];
    let (n2, s2) = stats[1];
    let q1 = s1 as f64 / n1 as f64;
    let q2 = s2 as f64 / n2 as f64;
    let pooled = (s1 + s2) as f64 / (n1 + n2) as f64;
    let var = pooled * (1.0 - pooled) * (1.0 / n1 as f64 + 1.0 / n2 as f64);
    let z_score = if var > 0.0 { (q1 - q2) / var.sqrt() } else { 0.0 };
    Ok(ProbeReport { q1, q2, z_score, conditioned_1: n1, conditioned_2: n2 })
}

/// Serializable device description: `{"povm": ..., "output_states": ...,
/// "seed": ...}`. Validation happens on conversion to [`NoisyDevice`].
#[derive(serde::Serialize, serde::Deserialize)]
pub struct DeviceSpec {
    pub povm: Povm,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_states: Option<Vec<DensityMatrix>>,
    pub seed: u64,
}

impl DeviceSpec {
    pub fn build(self) -> Result<NoisyDevice> {
        match self.output_states {
            Some(states) => NoisyDevice::with_output_states(self.povm, states, self.seed),
            None => Ok(NoisyDevice::new(self.povm, self.seed)),
        }
    }

    pub fn from_device(dev: &NoisyDevice) -> Self {
        Self {
            povm: dev.povm().clone(),
            output_states: dev.output_states().map(|s| s.to_vec()),
            seed: dev.seed(),
        }
    }
}

/// The probability that a repeat of outcome `k` follows a maximally mixed
/// post-measurement state is `tr(E_k)/d`; this exposes the trace for tests
/// and diagnostics.
pub fn effect_trace(povm: &Povm, k: usize) -> f64 {
    povm.effect(k).trace().re
}
