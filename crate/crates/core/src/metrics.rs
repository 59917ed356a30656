//! Average measurement fidelity and its closed-form lower bounds.
//!
//! For an ideal rank-1 projective measurement `{Π_k = |ψ_k⟩⟨ψ_k|}` and a
//! noisy POVM `{E_k}` on the same d-dimensional space, the figure of merit
//! is the Haar average
//!
//! `F̄ = ∫ (Σ_k √(p_k(ψ) r_k(ψ)))² dψ`,
//!
//! with `p_k = |⟨ψ_k|ψ⟩|²` and `r_k = ⟨ψ|E_k|ψ⟩`. It is bounded below in
//! closed form by the diagonal overlaps `u_k = tr(Π_k E_k)` alone:
//!
//! `lb = (1 + d·X̄)/(1 + d)`, `X̄ = (Σ_k √u_k)²/d²`,
//!
//! and, when the device also emits outcome-tagged output states with repeat
//! probabilities `q_k`, by the same formula with `√u_k → √(u_k q_k)`. Both
//! bounds need only diagonal quantities, which is what makes them cheap to
//! estimate on hardware; the exact `F̄` here is the simulation-side referee.

use serde::{Deserialize, Serialize};

use crate::exec::ExecMode;
use crate::haar::{
    bloch_integrate_in, bloch_state, mc_integrate_in, BlochQuadrature, HaarSampler,
};
use crate::linalg::ComplexMatrix;
use crate::quantum::{state_fidelity, DensityMatrix, Povm, PureState, Rank1Pvm};
use crate::simdevice::NoisyDevice;
use crate::{Error, Result};

/// How a fidelity value was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Quadrature,
    MonteCarlo,
    ClosedForm,
}

/// A fidelity (or error) value with its evaluation method and a one-sigma
/// uncertainty: the statistical standard error for Monte Carlo, the
/// refinement-difference estimate for quadrature, zero for closed forms.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct FidelityResult {
    pub value: f64,
    pub method: Method,
    pub std_err: f64,
}

/// `1 − F` with the uncertainty carried over.
pub fn avg_error(f: &FidelityResult) -> FidelityResult {
    FidelityResult { value: 1.0 - f.value, method: f.method, std_err: f.std_err }
}

/// Diagonal inputs to the closed-form bounds: overlaps `u_k` and, for the
/// output-state variant, repeat probabilities `q_k`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoundInputs {
    pub u: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<Vec<f64>>,
}

impl BoundInputs {
    pub fn probs(u: Vec<f64>) -> Self {
        Self { u, q: None }
    }

    pub fn with_states(u: Vec<f64>, q: Vec<f64>) -> Self {
        Self { u, q: Some(q) }
    }

    /// Checks lengths and ranges; returns the dimension.
    fn validate(&self) -> Result<usize> {
        let d = self.u.len();
        if d == 0 {
            return Err(Error::DimMismatch { expected: 1, found: 0 });
        }
        for &u in &self.u {
            if !(0.0..=1.0).contains(&u) || !u.is_finite() {
                return Err(Error::OutOfRange { what: "overlap u", value: u });
            }
        }
        if let Some(q) = &self.q {
            if q.len() != d {
                return Err(Error::DimMismatch { expected: d, found: q.len() });
            }
            for &q in q {
                if !(0.0..=1.0).contains(&q) || !q.is_finite() {
                    return Err(Error::OutOfRange { what: "repeat probability q", value: q });
                }
            }
        }
        Ok(d)
    }
}

/// Closed-form lower bound from overlaps alone:
/// `(1 + d·X̄)/(1 + d)` with `X̄ = (Σ_k √u_k)²/d²`.
pub fn lower_bound_probs(inputs: &BoundInputs) -> Result<f64> {
    let d = inputs.validate()? as f64;
    let s: f64 = inputs.u.iter().map(|&u| u.sqrt()).sum();
    let xbar = (s * s) / (d * d);
    Ok((1.0 + d * xbar) / (1.0 + d))
}

/// The same bound in expanded form,
/// `(d + Σ_k u_k + Σ_{l≠m} √(u_l u_m)) / (d(d+1))`,
/// kept as an independent cross-check of the algebra.
pub fn lower_bound_probs_expanded(inputs: &BoundInputs) -> Result<f64> {
    let d = inputs.validate()?;
    let diag: f64 = inputs.u.iter().sum();
    let mut cross = 0.0;
    for l in 0..d {
        for m in 0..d {
            if l != m {
                cross += (inputs.u[l] * inputs.u[m]).sqrt();
            }
        }
    }
    let d = d as f64;
    Ok((d + diag + cross) / (d * (d + 1.0)))
}

/// Output-state variant: `(1 + d·Z̄)/(1 + d)` with
/// `Z̄ = (Σ_k √(u_k q_k))²/d²`. Requires `q`; it lower-bounds `F̄` when each
/// repeat probability does not exceed the corresponding output-state
/// fidelity (`q_k ≤ F_k`), which [`crate::protocols::check_fk_qk`] tests.
pub fn lower_bound_states(inputs: &BoundInputs) -> Result<f64> {
    let d = inputs.validate()? as f64;
    let q = inputs.q.as_ref().ok_or(Error::OutOfRange {
        what: "repeat probabilities q (required by the output-state bound)",
        value: f64::NAN,
    })?;
    let s: f64 = inputs.u.iter().zip(q).map(|(&u, &q)| (u * q).sqrt()).sum();
    let zbar = (s * s) / (d * d);
    Ok((1.0 + d * zbar) / (1.0 + d))
}

/// Integration backend for the exact Haar averages.
#[derive(Clone, Copy, Debug)]
pub enum Integrator {
    /// Product quadrature on the Bloch sphere; qubit dimension only.
    Quadrature(BlochQuadrature),
    /// Haar Monte Carlo; any dimension.
    MonteCarlo { seed: u64, samples: usize },
}

impl Integrator {
    /// Quadrature for a qubit, one million Haar samples otherwise.
    pub fn default_for(dim: usize, seed: u64) -> Self {
        if dim == 2 {
            Integrator::Quadrature(BlochQuadrature::default())
        } else {
            Integrator::MonteCarlo { seed, samples: 1_000_000 }
        }
    }
}

fn check_dims(pvm: &Rank1Pvm, povm: &Povm) -> Result<usize> {
    if pvm.dim() != povm.dim() {
        return Err(Error::DimMismatch { expected: pvm.dim(), found: povm.dim() });
    }
    if povm.n_effects() != pvm.dim() {
        return Err(Error::DimMismatch { expected: pvm.dim(), found: povm.n_effects() });
    }
    Ok(pvm.dim())
}

/// `ψ(θ, φ)` expanded in the reference basis, so the quadrature grid covers
/// an arbitrary qubit PVM with `p_0 = cos²(θ/2)` exact by construction.
fn rotated_bloch_state(pvm: &Rank1Pvm, theta: f64, phi: f64) -> PureState {
    let w = bloch_state(theta, phi);
    let (b0, b1) = (pvm.state(0).amplitudes(), pvm.state(1).amplitudes());
    let amps = (0..2).map(|i| w.amplitudes()[0] * b0[i] + w.amplitudes()[1] * b1[i]).collect();
    // Unit norm is inherited from the orthonormal basis.
    PureState::new(amps).expect("rotated Bloch state stays normalized")
}

/// The pointwise summand `(Σ_k √(p_k r_k))²` with tiny negative `r_k`
/// clipped at zero.
fn fidelity_integrand(pvm: &Rank1Pvm, povm: &Povm, psi: &PureState) -> f64 {
    let mut s = 0.0;
    for k in 0..pvm.dim() {
        let p = pvm.state(k).prob_overlap(psi);
        let r = povm.effect(k).expectation(psi.amplitudes()).re.max(0.0);
        s += (p * r).sqrt();
    }
    s * s
}

/// `Σ_k p_k r_k`, whose Haar average has the closed form
/// `(Σ_k u_k + d)/(d(d+1))`; evaluated alongside the main integrand as an
/// internal consistency check of the integration machinery.
fn first_sum_integrand(pvm: &Rank1Pvm, povm: &Povm, psi: &PureState) -> f64 {
    let mut s = 0.0;
    for k in 0..pvm.dim() {
        let p = pvm.state(k).prob_overlap(psi);
        let r = povm.effect(k).expectation(psi.amplitudes()).re;
        s += p * r;
    }
    s
}

fn first_sum_target(pvm: &Rank1Pvm, povm: &Povm) -> Result<f64> {
    let d = pvm.dim() as f64;
    let mut total = 0.0;
    for k in 0..pvm.dim() {
        total += crate::quantum::overlap(pvm.state(k), povm.effect(k))?;
    }
    Ok((total + d) / (d * (d + 1.0)))
}

fn cross_check(measured: f64, target: f64, scale: f64) -> Result<()> {
    let tol = 5.0 * scale + 1e-9;
    if (measured - target).abs() > tol {
        return Err(Error::NumericalFailure {
            what: format!(
                "integration self-check failed: Σ_k E[p_k r_k] = {measured:.12e}, closed form {target:.12e}, tolerance {tol:.3e}"
            ),
        });
    }
    Ok(())
}

fn finish(value: f64, method: Method, std_err: f64) -> Result<FidelityResult> {
    if !value.is_finite() {
        return Err(Error::NumericalFailure { what: format!("fidelity evaluated to {value}") });
    }
    // Allow integration error to poke past [0, 1] by a hair, not more.
    if !(-1e-6..=1.0 + 1e-6).contains(&value) {
        return Err(Error::OutOfRange { what: "average fidelity", value });
    }
    Ok(FidelityResult { value: value.clamp(0.0, 1.0), method, std_err })
}

/// Exact average fidelity `F̄` between the ideal measurement and the POVM,
/// using the configured integrator and execution mode.
pub fn avg_fidelity_probs_in(
    pvm: &Rank1Pvm,
    povm: &Povm,
    integrator: &Integrator,
    mode: ExecMode,
) -> Result<FidelityResult> {
    let d = check_dims(pvm, povm)?;
    let target = first_sum_target(pvm, povm)?;
    match *integrator {
        Integrator::Quadrature(q) => {
            if d != 2 {
                return Err(Error::DimMismatch { expected: 2, found: d });
            }
            let est = bloch_integrate_in(
                |theta, phi| fidelity_integrand(pvm, povm, &rotated_bloch_state(pvm, theta, phi)),
                &q,
                mode,
            )?;
            let check = bloch_integrate_in(
                |theta, phi| first_sum_integrand(pvm, povm, &rotated_bloch_state(pvm, theta, phi)),
                &q,
                mode,
            )?;
            cross_check(check.value, target, check.error_estimate)?;
            finish(est.value, Method::Quadrature, est.error_estimate)
        }
        Integrator::MonteCarlo { seed, samples } => {
            let sampler = HaarSampler::new(d, seed);
            let est =
                mc_integrate_in(|psi| Ok(fidelity_integrand(pvm, povm, psi)), &sampler, samples, mode)?;
            let check = mc_integrate_in(
                |psi| Ok(first_sum_integrand(pvm, povm, psi)),
                &sampler,
                samples,
                mode,
            )?;
            cross_check(check.mean, target, check.std_err)?;
            finish(est.mean, Method::MonteCarlo, est.std_err)
        }
    }
}

/// [`avg_fidelity_probs_in`] with the default execution mode.
pub fn avg_fidelity_probs(
    pvm: &Rank1Pvm,
    povm: &Povm,
    integrator: &Integrator,
) -> Result<FidelityResult> {
    avg_fidelity_probs_in(pvm, povm, integrator, ExecMode::default())
}

/// The pointwise output-state summand: the Uhlmann fidelity between the
/// realized ensemble `Σ_k r_k ρ_k` and the ideal one `Σ_k p_k Π_k`.
fn states_integrand(
    pvm_states: &[DensityMatrix],
    pvm: &Rank1Pvm,
    dev: &NoisyDevice,
    states: &[DensityMatrix],
    psi: &PureState,
) -> Result<f64> {
    let d = pvm.dim();
    let mut realized: Vec<(f64, &DensityMatrix)> = Vec::with_capacity(d);
    let mut ideal: Vec<(f64, &DensityMatrix)> = Vec::with_capacity(d);
    for k in 0..d {
        let r = dev.povm().effect(k).expectation(psi.amplitudes()).re.max(0.0);
        realized.push((r, &states[k]));
        ideal.push((pvm.state(k).prob_overlap(psi), &pvm_states[k]));
    }
    state_fidelity(&DensityMatrix::mixture(&realized), &DensityMatrix::mixture(&ideal))
}

/// Exact average fidelity of the outcome-tagged ensembles: for each input
/// `ψ` the device leaves `Σ_k r_k ρ_k` where the ideal measurement would
/// leave `Σ_k p_k Π_k`, and the Uhlmann fidelity of the two is averaged
/// over Haar-random inputs. Requires the device to emit output states.
pub fn avg_fidelity_states_in(
    pvm: &Rank1Pvm,
    dev: &NoisyDevice,
    integrator: &Integrator,
    mode: ExecMode,
) -> Result<FidelityResult> {
    let d = check_dims(pvm, dev.povm())?;
    let states = dev.output_states().ok_or(Error::NoOutputStates)?;
    let pvm_states: Vec<DensityMatrix> =
        (0..d).map(|k| DensityMatrix::from_pure(pvm.state(k))).collect();
    match *integrator {
        Integrator::Quadrature(q) => {
            if d != 2 {
                return Err(Error::DimMismatch { expected: 2, found: d });
            }
            let est = bloch_integrate_in(
                |theta, phi| {
                    let psi = rotated_bloch_state(pvm, theta, phi);
                    // Uhlmann failures surface as non-finite samples, which
                    // the quadrature rejects as a numerical failure.
                    states_integrand(&pvm_states, pvm, dev, states, &psi).unwrap_or(f64::NAN)
                },
                &q,
                mode,
            )?;
            finish(est.value, Method::Quadrature, est.error_estimate)
        }
        Integrator::MonteCarlo { seed, samples } => {
            let sampler = HaarSampler::new(d, seed);
            let est = mc_integrate_in(
                |psi| states_integrand(&pvm_states, pvm, dev, states, psi),
                &sampler,
                samples,
                mode,
            )?;
            finish(est.mean, Method::MonteCarlo, est.std_err)
        }
    }
}

/// [`avg_fidelity_states_in`] with the default execution mode.
pub fn avg_fidelity_states(
    pvm: &Rank1Pvm,
    dev: &NoisyDevice,
    integrator: &Integrator,
) -> Result<FidelityResult> {
    avg_fidelity_states_in(pvm, dev, integrator, ExecMode::default())
}

/// Overlaps `u_k = tr(Π_k E_k)` computed exactly from the model.
pub fn exact_overlaps(pvm: &Rank1Pvm, povm: &Povm) -> Result<Vec<f64>> {
    let d = check_dims(pvm, povm)?;
    (0..d).map(|k| crate::quantum::overlap(pvm.state(k), povm.effect(k))).collect()
}

/// Repeat probabilities `q_k = tr(E_k ρ_k)` computed exactly from the model.
pub fn exact_repeat_probs(pvm: &Rank1Pvm, dev: &NoisyDevice) -> Result<Vec<f64>> {
    let d = check_dims(pvm, dev.povm())?;
    let states = dev.output_states().ok_or(Error::NoOutputStates)?;
    Ok((0..d).map(|k| effect_expectation(dev.povm().effect(k), &states[k])).collect())
}

fn effect_expectation(effect: &ComplexMatrix, rho: &DensityMatrix) -> f64 {
    effect.trace_product(rho.matrix()).re
}
