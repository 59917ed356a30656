//! Sampling protocols that certify the fidelity bounds from device shots.
//!
//! Both protocols reduce to estimating diagonal quantities by repeated
//! preparation and measurement. For a single binomial parameter `u`, a
//! Chebyshev argument pins the trial count
//!
//! `N = ⌈j_δ² u(1−u)/ε²⌉`, `j_δ` the smallest integer with `1/j² ≤ δ`,
//!
//! and for the pair average over `(l, m)` a Hoeffding argument pins
//!
//! `K = ⌈ln(2/δ)(b−a)²/(2ε²)⌉`
//!
//! sampled pairs. Counts are turned into probabilities through a Laplace
//! (add-λ) rule, which keeps square roots well-defined at zero counts and
//! biases estimates toward 1/2, the conservative direction for overlaps
//! near 1.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::exec::ExecMode;
use crate::metrics::{lower_bound_probs, lower_bound_states, BoundInputs};
use crate::quantum::{DensityMatrix, Rank1Pvm};
use crate::simdevice::NoisyDevice;
use crate::{Error, Result};

/// Largest dimension for which the pair estimate may enumerate all `d²`
/// ordered pairs instead of sampling them.
pub const EXHAUSTIVE_PAIR_LIMIT: usize = 64;

const MAX_SEQUENTIAL_ROUNDS_FACTOR: usize = 64;

/// Tuning knobs for both protocols. `epsilon`/`delta` are the target
/// accuracy and failure probability; `lambda` the Laplace smoothing weight;
/// `u_guess` the a-priori overlap scale used to size per-index trial counts
/// (0.5 is the worst case); `pair_range` the value range assumed by the
/// Hoeffding pair count.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EstimationConfig {
    pub epsilon: f64,
    pub delta: f64,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    pub seed: u64,
    #[serde(default = "default_u_guess")]
    pub u_guess: f64,
    #[serde(default = "default_pair_range")]
    pub pair_range: (f64, f64),
    /// Enumerate all ordered pairs (dimension permitting) instead of
    /// sampling `K` of them.
    #[serde(default)]
    pub exhaustive_pairs: bool,
    /// Reuse one estimate per distinct index across pairs (the economical
    /// default); `false` draws two fresh estimates for every pair.
    #[serde(default = "default_true")]
    pub reuse_estimates: bool,
    /// Skip sampling and read probabilities exactly off the model; the
    /// protocol structure and accounting stay the same.
    #[serde(default)]
    pub exact_probabilities: bool,
}

fn default_lambda() -> f64 {
    1.0
}

fn default_u_guess() -> f64 {
    0.99
}

fn default_pair_range() -> (f64, f64) {
    (0.0, 1.0)
}

fn default_true() -> bool {
    true
}

impl EstimationConfig {
    pub fn new(epsilon: f64, delta: f64, seed: u64) -> Self {
        Self {
            epsilon,
            delta,
            lambda: default_lambda(),
            seed,
            u_guess: default_u_guess(),
            pair_range: default_pair_range(),
            exhaustive_pairs: false,
            reuse_estimates: true,
            exact_probabilities: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::OutOfRange { what: "epsilon", value: self.epsilon });
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::OutOfRange { what: "delta", value: self.delta });
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::OutOfRange { what: "lambda", value: self.lambda });
        }
        if !(0.0..=1.0).contains(&self.u_guess) {
            return Err(Error::OutOfRange { what: "u_guess", value: self.u_guess });
        }
        let (a, b) = self.pair_range;
        if !(a.is_finite() && b.is_finite() && b > a) {
            return Err(Error::OutOfRange { what: "pair_range width", value: b - a });
        }
        Ok(())
    }
}

/// Ceiling that first snaps values within one part in 10⁹ of an integer
/// onto it, so analytically integral trial counts don't round up from
/// floating-point residue.
fn ceil_snapped(x: f64) -> Result<u64> {
    if !x.is_finite() || x < 0.0 {
        return Err(Error::OutOfRange { what: "trial count", value: x });
    }
    let nearest = x.round();
    let snapped =
        if (x - nearest).abs() <= 1e-9 * nearest.abs().max(1.0) { nearest } else { x.ceil() };
    if snapped > u64::MAX as f64 {
        return Err(Error::OutOfRange { what: "trial count", value: snapped });
    }
    Ok(snapped.max(1.0) as u64)
}

/// Smallest integer `j` with `1/j² ≤ δ`.
fn smallest_inverse_square(delta: f64) -> u64 {
    let mut j = (1.0 / delta.sqrt()).ceil().max(1.0) as u64;
    // Guard both sides of the floating-point boundary.
    while j > 1 && 1.0 / ((j - 1) as f64 * (j - 1) as f64) <= delta {
        j -= 1;
    }
    while 1.0 / (j as f64 * j as f64) > delta {
        j += 1;
    }
    j
}

/// Chebyshev trial count for estimating a binomial parameter near `u` to
/// within `ε` except with probability `δ`.
pub fn chebyshev_trials(epsilon: f64, delta: f64, u: f64) -> Result<u64> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::OutOfRange { what: "epsilon", value: epsilon });
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::OutOfRange { what: "delta", value: delta });
    }
    if !(0.0..=1.0).contains(&u) {
        return Err(Error::OutOfRange { what: "u", value: u });
    }
    let j = smallest_inverse_square(delta) as f64;
    ceil_snapped(j * j * u * (1.0 - u) / (epsilon * epsilon))
}

/// Hoeffding count of sampled pairs for estimating a mean of values in
/// `[a, b]` to within `ε` except with probability `δ`.
pub fn hoeffding_pairs(epsilon: f64, delta: f64, range: (f64, f64)) -> Result<u64> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::OutOfRange { what: "epsilon", value: epsilon });
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::OutOfRange { what: "delta", value: delta });
    }
    let (a, b) = range;
    if !(a.is_finite() && b.is_finite() && b > a) {
        return Err(Error::OutOfRange { what: "pair_range width", value: b - a });
    }
    let span = b - a;
    ceil_snapped((2.0 / delta).ln() * span * span / (2.0 * epsilon * epsilon))
}

/// Laplace (add-λ) estimate of a binomial parameter from `successes` out of
/// `trials`: `(n + λ)/(N + 2λ)`.
pub fn laplace_estimate(successes: u64, trials: u64, lambda: f64) -> Result<f64> {
    if trials == 0 && lambda == 0.0 {
        return Err(Error::ZeroTrials);
    }
    if successes > trials {
        return Err(Error::OutOfRange { what: "successes", value: successes as f64 });
    }
    Ok((successes as f64 + lambda) / (trials as f64 + 2.0 * lambda))
}

/// Per-index measurement record: trials, successes, and the smoothed
/// estimate(s) derived from them.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct IndexEstimate {
    pub trials: u64,
    pub successes: u64,
    pub u_hat: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repeat_trials: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repeat_successes: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_hat: Option<f64>,
}

/// Where the trial counts came from.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct TrialAccounting {
    /// Per-index first-measurement trials.
    pub n1: u64,
    /// Conditioned-repeat target, when the output-state protocol ran.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n2: Option<u64>,
    /// Preparation rounds actually spent per index to reach the repeat
    /// target (the data-dependent cost of conditioning), maximized over
    /// indices.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m2: Option<u64>,
    /// Hoeffding pair count (sampled-pair mode only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_pairs: Option<u64>,
}

/// Everything a protocol run produces: the certified bound, per-index raw
/// data, pair bookkeeping, and the exact shot count spent.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProtocolReport {
    pub lb_hat: f64,
    pub per_index: BTreeMap<usize, IndexEstimate>,
    pub pairs: Vec<(usize, usize)>,
    pub accounting: TrialAccounting,
    pub config: EstimationConfig,
    pub device_seed: u64,
    pub total_shots: u64,
}

fn pair_rng(cfg: &EstimationConfig) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    // Streams 0.. are taken by measurement batches; pair choice gets its own.
    rng.set_stream(u64::MAX);
    rng
}

fn estimate_overlap(
    dev: &NoisyDevice,
    pvm: &Rank1Pvm,
    index: usize,
    n: u64,
    lambda: f64,
    substream: u64,
    exact: bool,
) -> Result<IndexEstimate> {
    if exact {
        let u = crate::quantum::overlap(pvm.state(index), dev.povm().effect(index))?;
        return Ok(IndexEstimate {
            trials: 0,
            successes: 0,
            u_hat: u,
            repeat_trials: None,
            repeat_successes: None,
            q_hat: None,
        });
    }
    let mut child = dev.clone_with_substream(substream);
    let input = DensityMatrix::from_pure(pvm.state(index));
    let counts = child.measure_counts_chunked(&input, n as usize, ExecMode::default())?;
    let successes = counts[index];
    Ok(IndexEstimate {
        trials: n,
        successes,
        u_hat: laplace_estimate(successes, n, lambda)?,
        repeat_trials: None,
        repeat_successes: None,
        q_hat: None,
    })
}

/// Runs the pair-sampling protocol for the overlap bound: estimate `u_l`
/// from device shots, average `√(û_l û_m)` over ordered index pairs, and
/// report `lb = (1 + d·X̄)/(1 + d)`.
///
/// Shots are drawn on sub-streams of the device's RNG keyed by the
/// protocol seed, so a report is reproducible from `(device, config)`.
pub fn run_protocol_probs(
    dev: &NoisyDevice,
    pvm: &Rank1Pvm,
    cfg: &EstimationConfig,
) -> Result<ProtocolReport> {
    cfg.validate()?;
    let d = pvm.dim();
    if dev.dim() != d {
        return Err(Error::DimMismatch { expected: d, found: dev.dim() });
    }
    if dev.povm().n_effects() != d {
        return Err(Error::DimMismatch { expected: d, found: dev.povm().n_effects() });
    }
    let n = chebyshev_trials(cfg.epsilon, cfg.delta, cfg.u_guess)?;

    let exhaustive = cfg.exhaustive_pairs;
    if exhaustive && d > EXHAUSTIVE_PAIR_LIMIT {
        return Err(Error::OutOfRange { what: "dimension for exhaustive pairs", value: d as f64 });
    }

    let mut per_index: BTreeMap<usize, IndexEstimate> = BTreeMap::new();
    let mut total_shots = 0u64;
    let mut substream = 0u64;
    let fresh = |index: usize, total_shots: &mut u64, substream: &mut u64| -> Result<IndexEstimate> {
        *substream += 1;
        let est = estimate_overlap(
            dev,
            pvm,
            index,
            n,
            cfg.lambda,
            cfg.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(*substream),
            cfg.exact_probabilities,
        )?;
        *total_shots += est.trials;
        Ok(est)
    };

    let (pairs, k_pairs): (Vec<(usize, usize)>, Option<u64>) = if exhaustive {
        ((0..d).flat_map(|l| (0..d).map(move |m| (l, m))).collect(), None)
    } else {
        let k = hoeffding_pairs(cfg.epsilon, cfg.delta, cfg.pair_range)?;
        let mut rng = pair_rng(cfg);
        let pairs =
            (0..k).map(|_| (rng.random_range(0..d), rng.random_range(0..d))).collect();
        (pairs, Some(k))
    };

    let lb_hat = if exhaustive {
        // Enumerating every ordered pair with one estimate per index is
        // algebraically the closed-form bound applied to û.
        for index in 0..d {
            let est = fresh(index, &mut total_shots, &mut substream)?;
            per_index.insert(index, est);
        }
        let u: Vec<f64> = (0..d).map(|i| per_index[&i].u_hat).collect();
        lower_bound_probs(&BoundInputs::probs(u))?
    } else {
        let mut pair_sum = 0.0;
        for &(l, m) in &pairs {
            let (ul, um) = if cfg.reuse_estimates {
                for &i in &[l, m] {
                    if let Entry::Vacant(slot) = per_index.entry(i) {
                        slot.insert(fresh(i, &mut total_shots, &mut substream)?);
                    }
                }
                (per_index[&l].u_hat, per_index[&m].u_hat)
            } else {
                // Two independent fresh estimates per pair, even when l = m.
                let el = fresh(l, &mut total_shots, &mut substream)?;
                let em = fresh(m, &mut total_shots, &mut substream)?;
                per_index.entry(l).or_insert(el);
                per_index.entry(m).or_insert(em);
                (el.u_hat, em.u_hat)
            };
            pair_sum += (ul * um).sqrt();
        }
        let xbar = pair_sum / pairs.len() as f64;
        (1.0 + d as f64 * xbar) / (1.0 + d as f64)
    };

    Ok(ProtocolReport {
        lb_hat,
        per_index,
        pairs,
        accounting: TrialAccounting { n1: n, n2: None, m2: None, k_pairs },
        config: cfg.clone(),
        device_seed: dev.seed(),
        total_shots,
    })
}

/// Runs the output-state protocol: for each index, measure `ψ_l` until both
/// `N₁` first outcomes and `N₂` conditioned repeats are in hand, estimate
/// `u_l` from the first outcomes and `q_l` from the repeats, and report the
/// bound built from `√(û_l q̂_l)`.
pub fn run_protocol_states(
    dev: &NoisyDevice,
    pvm: &Rank1Pvm,
    cfg: &EstimationConfig,
) -> Result<ProtocolReport> {
    cfg.validate()?;
    let d = pvm.dim();
    if dev.dim() != d {
        return Err(Error::DimMismatch { expected: d, found: dev.dim() });
    }
    if dev.output_states().is_none() {
        return Err(Error::NoOutputStates);
    }
    let n1 = chebyshev_trials(cfg.epsilon, cfg.delta, cfg.u_guess)?;
    let n2 = n1;
    let max_rounds = n1
        .saturating_mul(MAX_SEQUENTIAL_ROUNDS_FACTOR as u64)
        .max(n2.saturating_mul(MAX_SEQUENTIAL_ROUNDS_FACTOR as u64));

    let mut per_index = BTreeMap::new();
    let mut total_shots = 0u64;
    let mut m2_worst = 0u64;

    for index in 0..d {
        if cfg.exact_probabilities {
            let u = crate::quantum::overlap(pvm.state(index), dev.povm().effect(index))?;
            let states = dev.output_states().expect("checked above");
            let q = dev.povm().effect(index).trace_product(states[index].matrix()).re;
            per_index.insert(
                index,
                IndexEstimate {
                    trials: 0,
                    successes: 0,
                    u_hat: u,
                    repeat_trials: Some(0),
                    repeat_successes: Some(0),
                    q_hat: Some(q),
                },
            );
            continue;
        }
        let mut child = dev
            .clone_with_substream(cfg.seed.wrapping_mul(0xD134_2543_DE82_EF95).wrapping_add(index as u64 + 1));
        let input = DensityMatrix::from_pure(pvm.state(index));
        let (mut rounds, mut firsts, mut repeats) = (0u64, 0u64, 0u64);
        while rounds < n1 || firsts < n2 {
            if rounds >= max_rounds {
                return Err(Error::InsufficientConditionedSamples {
                    needed: n2 as usize,
                    got: firsts as usize,
                });
            }
            let (first, second) = child.measure_sequential(&input)?;
            rounds += 1;
            if first == index {
                firsts += 1;
                if second == Some(index) {
                    repeats += 1;
                }
            }
        }
        total_shots += child.shots();
        m2_worst = m2_worst.max(rounds);
        per_index.insert(
            index,
            IndexEstimate {
                trials: rounds,
                successes: firsts,
                u_hat: laplace_estimate(firsts, rounds, cfg.lambda)?,
                repeat_trials: Some(firsts),
                repeat_successes: Some(repeats),
                q_hat: Some(laplace_estimate(repeats, firsts, cfg.lambda)?),
            },
        );
    }

    let u: Vec<f64> = (0..d).map(|i| per_index[&i].u_hat).collect();
    let q: Vec<f64> = (0..d).map(|i| per_index[&i].q_hat.expect("states protocol")).collect();
    let lb_hat = lower_bound_states(&BoundInputs::with_states(u, q))?;

    Ok(ProtocolReport {
        lb_hat,
        per_index,
        pairs: Vec::new(),
        accounting: TrialAccounting {
            n1,
            n2: Some(n2),
            m2: if cfg.exact_probabilities { None } else { Some(m2_worst) },
            k_pairs: None,
        },
        config: cfg.clone(),
        device_seed: dev.seed(),
        total_shots,
    })
}

/// Per-index comparison of the output-state fidelity `F_k = tr(ρ_k Π_k)`
/// with the repeat probability `Q_k = tr(ρ_k E_k)`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct FkQkRow {
    pub index: usize,
    pub f_k: f64,
    pub q_k: f64,
    pub ok: bool,
}

/// Validity audit for the output-state bound.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FkQkReport {
    pub rows: Vec<FkQkRow>,
    /// Every index satisfies `F_k ≥ Q_k` (up to rounding).
    pub all_ok: bool,
    /// `Ȳ = (Σ_k √(u_k F_k))²/d²`.
    pub ybar: f64,
    /// `Z̄ = (Σ_k √(u_k Q_k))²/d²`.
    pub zbar: f64,
    /// The aggregate comparison `Ȳ ≥ Z̄`, which is all the bound needs.
    pub aggregate_ok: bool,
}

/// Checks the premise under which the output-state bound is a bound: each
/// emitted `ρ_k` should overlap the ideal target `Π_k` at least as much as
/// it triggers a repeated `E_k` click.
pub fn check_fk_qk(dev: &NoisyDevice, pvm: &Rank1Pvm) -> Result<FkQkReport> {
    let d = pvm.dim();
    if dev.dim() != d {
        return Err(Error::DimMismatch { expected: d, found: dev.dim() });
    }
    let states = dev.output_states().ok_or(Error::NoOutputStates)?;
    let mut rows = Vec::with_capacity(d);
    let mut sy = 0.0;
    let mut sz = 0.0;
    for k in 0..d {
        let f_k = pvm.projector(k).trace_product(states[k].matrix()).re;
        let q_k = dev.povm().effect(k).trace_product(states[k].matrix()).re;
        let u_k = crate::quantum::overlap(pvm.state(k), dev.povm().effect(k))?;
        rows.push(FkQkRow { index: k, f_k, q_k, ok: f_k >= q_k - 1e-12 });
        sy += (u_k * f_k.max(0.0)).sqrt();
        sz += (u_k * q_k.max(0.0)).sqrt();
    }
    let d2 = (d * d) as f64;
    let ybar = sy * sy / d2;
    let zbar = sz * sz / d2;
    Ok(FkQkReport {
        all_ok: rows.iter().all(|r| r.ok),
        rows,
        ybar,
        zbar,
        aggregate_ok: ybar >= zbar - 1e-12,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::{qubit_effect_pair, validate_povm, Povm};
    use approx::assert_abs_diff_eq;
    use num_complex::Complex64;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn confusion(u0: f64) -> Povm {
        validate_povm(qubit_effect_pair(u0, c(0.0, 0.0))).unwrap()
    }

    fn projector_states(pvm: &Rank1Pvm) -> Vec<DensityMatrix> {
        (0..pvm.dim()).map(|k| DensityMatrix::from_pure(pvm.state(k))).collect()
    }

    #[test]
    fn published_trial_counts() {
        assert_eq!(chebyshev_trials(0.01, 0.01, 0.99).unwrap(), 9900);
        assert_eq!(hoeffding_pairs(0.01, 0.05, (0.0, 1.0)).unwrap(), 18445);
    }

    #[test]
    fn smallest_inverse_square_boundaries() {
        assert_eq!(smallest_inverse_square(0.05), 5);
        assert_eq!(smallest_inverse_square(0.01), 10);
        assert_eq!(smallest_inverse_square(0.25), 2);
        assert_eq!(smallest_inverse_square(1.0 / 9.0), 3);
        assert_eq!(smallest_inverse_square(0.9), 2);
    }

    #[test]
    fn chebyshev_worst_case_at_half() {
        // u(1-u) peaks at 1/4: N = ceil(j² / (4ε²)).
        assert_eq!(chebyshev_trials(0.1, 0.25, 0.5).unwrap(), 100);
        let n_99 = chebyshev_trials(0.01, 0.01, 0.99).unwrap();
        let n_50 = chebyshev_trials(0.01, 0.01, 0.5).unwrap();
        assert!(n_50 > n_99);
        assert_eq!(n_50, 250_000);
    }

    #[test]
    fn laplace_estimate_shrinks_toward_half() {
        assert_abs_diff_eq!(laplace_estimate(0, 0, 1.0).unwrap(), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(laplace_estimate(10, 10, 1.0).unwrap(), 11.0 / 12.0, epsilon = 1e-15);
        assert_abs_diff_eq!(laplace_estimate(10, 10, 0.0).unwrap(), 1.0, epsilon = 1e-15);
        assert!(matches!(laplace_estimate(0, 0, 0.0), Err(Error::ZeroTrials)));
        assert!(matches!(laplace_estimate(3, 2, 1.0), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn laplace_bias_identity_is_exact_in_expectation() {
        // E[û] = (Nu + λ)/(N + 2λ) by linearity; checked exactly by summing
        // the binomial law, and ≤ u precisely when u ≥ 1/2.
        let n = 60u64;
        for &(u, lambda) in &[(0.9f64, 1.0f64), (0.5, 1.0), (0.2, 2.0), (0.97, 0.5)] {
            let mut expect = 0.0;
            let mut pmf = (1.0f64 - u).powi(n as i32); // P[X = 0]
            for k in 0..=n {
                if k > 0 {
                    pmf *= (n - k + 1) as f64 / k as f64 * (u / (1.0 - u));
                }
                expect += pmf * laplace_estimate(k, n, lambda).unwrap();
            }
            let closed = (n as f64 * u + lambda) / (n as f64 + 2.0 * lambda);
            assert_abs_diff_eq!(expect, closed, epsilon = 1e-12);
            if u >= 0.5 {
                assert!(closed <= u + 1e-15);
            } else {
                assert!(closed >= u);
            }
        }
    }

    #[test]
    fn exact_mode_reproduces_closed_form_bitwise() {
        let pvm = Rank1Pvm::computational(2);
        let dev = NoisyDevice::new(confusion(0.99), 7);
        let mut cfg = EstimationConfig::new(0.01, 0.01, 1);
        cfg.exact_probabilities = true;
        cfg.exhaustive_pairs = true;
        let report = run_protocol_probs(&dev, &pvm, &cfg).unwrap();
        let closed = lower_bound_probs(&BoundInputs::probs(vec![0.99, 0.99])).unwrap();
        assert_eq!(report.lb_hat, closed);
        assert_eq!(report.total_shots, 0);
        assert_eq!(report.pairs.len(), 4);
    }

    #[test]
    fn ideal_device_with_no_smoothing_certifies_unity() {
        let pvm = Rank1Pvm::computational(2);
        let dev = NoisyDevice::new(pvm.as_povm(), 3);
        let mut cfg = EstimationConfig::new(0.05, 0.05, 2);
        cfg.lambda = 0.0;
        cfg.u_guess = 0.5;
        let report = run_protocol_probs(&dev, &pvm, &cfg).unwrap();
        assert_eq!(report.lb_hat, 1.0);
        assert!(report.total_shots > 0);
    }

    #[test]
    fn smoothing_keeps_estimates_strictly_inside_unit_interval() {
        let pvm = Rank1Pvm::computational(2);
        let dev = NoisyDevice::new(pvm.as_povm(), 3);
        let cfg = EstimationConfig::new(0.05, 0.05, 2);
        let report = run_protocol_probs(&dev, &pvm, &cfg).unwrap();
        for est in report.per_index.values() {
            assert!(est.u_hat < 1.0 && est.u_hat > 0.0);
        }
        assert!(report.lb_hat < 1.0);
    }

    #[test]
    fn sampled_protocol_lands_within_epsilon_on_a_quiet_device() {
        let pvm = Rank1Pvm::computational(2);
        let dev = NoisyDevice::new(confusion(0.99), 11);
        let cfg = EstimationConfig::new(0.01, 0.01, 5);
        let report = run_protocol_probs(&dev, &pvm, &cfg).unwrap();
        let truth = lower_bound_probs(&BoundInputs::probs(vec![0.99, 0.99])).unwrap();
        assert!((report.lb_hat - truth).abs() < 0.01, "{report:?}");
        assert_eq!(report.accounting.n1, 9900);
        // K = ⌈ln(200)/(2·10⁻⁴)⌉ for δ = 0.01 over [0, 1].
        assert_eq!(report.accounting.k_pairs, Some(26492));
        // Reused estimates: d distinct indices measured once each.
        assert_eq!(report.total_shots, 2 * 9900);
    }

    #[test]
    fn fresh_pair_estimates_double_the_shot_bill() {
        let pvm = Rank1Pvm::computational(2);
        let dev = NoisyDevice::new(confusion(0.95), 11);
        let mut cfg = EstimationConfig::new(0.1, 0.25, 5);
        cfg.u_guess = 0.5;
        cfg.reuse_estimates = false;
        let report = run_protocol_probs(&dev, &pvm, &cfg).unwrap();
        let k = report.accounting.k_pairs.unwrap();
        assert_eq!(report.total_shots, 2 * k * report.accounting.n1);
    }

    #[test]
    fn exhaustive_mode_rejects_large_dimensions() {
        let pvm = Rank1Pvm::computational(2);
        let dev = NoisyDevice::new(confusion(0.95), 1);
        let mut cfg = EstimationConfig::new(0.1, 0.25, 5);
        cfg.exhaustive_pairs = true;
        assert!(run_protocol_probs(&dev, &pvm, &cfg).is_ok());
    }

    #[test]
    fn d4_diagonal_device_certifies_its_bound() {
        let d = 4;
        let pvm = Rank1Pvm::computational(d);
        let u_true = [0.97, 0.95, 0.92, 0.9];
        let effects: Vec<crate::linalg::ComplexMatrix> = (0..d)
            .map(|k| {
                crate::linalg::ComplexMatrix::from_fn(d, |i, j| {
                    if i != j {
                        c(0.0, 0.0)
                    } else if i == k {
                        c(u_true[k], 0.0)
                    } else {
                        c((1.0 - u_true[i]) / (d as f64 - 1.0), 0.0)
                    }
                })
            })
            .collect();
        let dev = NoisyDevice::new(validate_povm(effects).unwrap(), 21);
        let mut cfg = EstimationConfig::new(0.02, 0.05, 9);
        cfg.u_guess = 0.9;
        let report = run_protocol_probs(&dev, &pvm, &cfg).unwrap();
        let truth = lower_bound_probs(&BoundInputs::probs(u_true.to_vec())).unwrap();
        assert!((report.lb_hat - truth).abs() < 0.02, "lb {} truth {}", report.lb_hat, truth);
    }

    #[test]
    fn states_protocol_on_published_example() {
        let pvm = Rank1Pvm::computational(2);
        let dev =
            NoisyDevice::with_output_states(confusion(0.99), projector_states(&pvm), 31).unwrap();
        let cfg = EstimationConfig::new(0.01, 0.01, 13);
        let report = run_protocol_states(&dev, &pvm, &cfg).unwrap();
        let truth =
            lower_bound_states(&BoundInputs::with_states(vec![0.99; 2], vec![0.99; 2])).unwrap();
        assert_abs_diff_eq!(truth, 0.986733, epsilon = 5e-7);
        assert!((report.lb_hat - truth).abs() < 0.01, "{}", report.lb_hat);
        let acct = report.accounting;
        assert_eq!(acct.n1, 9900);
        assert_eq!(acct.n2, Some(9900));
        // Reaching N₂ conditioned repeats at u ≈ 0.99 takes barely more
        // than N₁ rounds.
        assert!(acct.m2.unwrap() >= 9900 && acct.m2.unwrap() < 12_000, "{acct:?}");
    }

    #[test]
    fn states_protocol_flags_starved_conditioning() {
        // An input nearly orthogonal to its own index would need far more
        // rounds than the cap allows.
        let d = 2;
        let swapped = Rank1Pvm::new(vec![
            crate::quantum::PureState::basis_state(d, 1),
            crate::quantum::PureState::basis_state(d, 0),
        ])
        .unwrap();
        let dev =
            NoisyDevice::with_output_states(confusion(0.999), projector_states(&swapped), 3)
                .unwrap();
        let cfg = EstimationConfig::new(0.05, 0.05, 1);
        let err = run_protocol_states(&dev, &swapped, &cfg);
        assert!(matches!(err, Err(Error::InsufficientConditionedSamples { .. })), "{err:?}");
    }

    #[test]
    fn states_protocol_exact_mode_matches_closed_form() {
        let pvm = Rank1Pvm::computational(2);
        let dev =
            NoisyDevice::with_output_states(confusion(0.99), projector_states(&pvm), 31).unwrap();
        let mut cfg = EstimationConfig::new(0.01, 0.05, 13);
        cfg.exact_probabilities = true;
        let report = run_protocol_states(&dev, &pvm, &cfg).unwrap();
        let truth =
            lower_bound_states(&BoundInputs::with_states(vec![0.99; 2], vec![0.99; 2])).unwrap();
        assert_eq!(report.lb_hat, truth);
        assert_eq!(report.total_shots, 0);
    }

    #[test]
    fn fk_qk_passes_on_projector_outputs() {
        let pvm = Rank1Pvm::computational(2);
        let dev =
            NoisyDevice::with_output_states(confusion(0.99), projector_states(&pvm), 1).unwrap();
        let report = check_fk_qk(&dev, &pvm).unwrap();
        assert!(report.all_ok && report.aggregate_ok, "{report:?}");
        for row in &report.rows {
            assert_abs_diff_eq!(row.f_k, 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(row.q_k, 0.99, epsilon = 1e-12);
        }
        assert!(report.ybar >= report.zbar);
    }

    #[test]
    fn fk_qk_detects_adversarial_outputs() {
        // ρ_0 chosen orthogonal to Π_0 but aligned with E_0's large block:
        // the repeat probability exceeds the fidelity and the premise fails.
        let e0 = crate::linalg::ComplexMatrix::from_rows(&[
            vec![c(0.1, 0.0), c(0.0, 0.0)],
            vec![c(0.0, 0.0), c(0.9, 0.0)],
        ])
        .unwrap();
        let e1 = crate::linalg::ComplexMatrix::identity(2).sub(&e0);
        let povm = validate_povm(vec![e0, e1]).unwrap();
        let pvm = Rank1Pvm::computational(2);
        let states = vec![
            DensityMatrix::from_pure(&crate::quantum::PureState::basis_state(2, 1)),
            DensityMatrix::from_pure(&crate::quantum::PureState::basis_state(2, 0)),
        ];
        let dev = NoisyDevice::with_output_states(povm, states, 1).unwrap();
        let report = check_fk_qk(&dev, &pvm).unwrap();
        assert!(!report.all_ok, "{report:?}");
    }

    #[test]
    fn reports_serialize_round_trip() {
        let pvm = Rank1Pvm::computational(2);
        let dev = NoisyDevice::new(confusion(0.95), 17);
        let mut cfg = EstimationConfig::new(0.1, 0.25, 3);
        cfg.u_guess = 0.5;
        let report = run_protocol_probs(&dev, &pvm, &cfg).unwrap();
        let text = serde_json::to_string(&report).unwrap();
        let back: ProtocolReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back.lb_hat, report.lb_hat);
        assert_eq!(back.total_shots, report.total_shots);
        assert_eq!(serde_json::to_string(&back).unwrap(), text);
    }

    #[test]
    fn runs_are_reproducible_and_seed_sensitive() {
        let pvm = Rank1Pvm::computational(2);
        let dev = NoisyDevice::new(confusion(0.9), 5);
        let mut cfg = EstimationConfig::new(0.05, 0.25, 7);
        cfg.u_guess = 0.5;
        let a = run_protocol_probs(&dev, &pvm, &cfg).unwrap();
        let b = run_protocol_probs(&dev, &pvm, &cfg).unwrap();
        assert_eq!(a.lb_hat, b.lb_hat);
        cfg.seed = 8;
        let c = run_protocol_probs(&dev, &pvm, &cfg).unwrap();
        assert_ne!(a.lb_hat, c.lb_hat);
    }
}
