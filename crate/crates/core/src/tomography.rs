//! Full measurement tomography, as the cost baseline the bounds undercut.
//!
//! Reconstructing every effect of a d-outcome POVM takes d² probe states:
//! the basis states `e_i`, the superpositions `(e_i + e_j)/√2` for `i < j`,
//! and `(e_i + i·e_j)/√2` for `i < j`. Each probe produces d outcome
//! probabilities, so the baseline consumes d³ numbers where the certified
//! bound needs one or two per outcome. The assembly identities, writing
//! `t_s(k)` for the probability of outcome `k` on probe `s`:
//!
//! `(E_k)_ii = t_i`,
//! `t⁺ = ½(E_ii + E_jj) + Re E_ij`, `t⁻ = ½(E_ii + E_jj) − Im E_ij`,
//!
//! so `t⁺ + i·t⁻ − (1+i)(t_i + t_j)/2 = conj(E_ij)`. Sampled statistics are
//! smoothed with an add-one rule per outcome bin, then the raw effects are
//! repaired: hermitize, clip negative eigenvalues, and restore completeness
//! by the congruence `S^{-1/2} E_k S^{-1/2}` (additively when `S` is too
//! close to singular to invert).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::exec::ExecMode;
use crate::linalg::ComplexMatrix;
use crate::quantum::{validate_povm, DensityMatrix, Povm, PureState, Rank1Pvm};
use crate::simdevice::NoisyDevice;
use crate::{Error, Result, TOL_COMPLETE};

/// Minimum eigenvalue of the effect sum below which the congruence repair
/// gives way to the additive one.
const SINGULAR_SUM_FLOOR: f64 = 1e-6;

/// Probe schedule for reconstructing a d-dimensional POVM.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct TomographyPlan {
    pub dim: usize,
    /// Shots per probe state; `None` reads probabilities exactly off the
    /// model.
    pub shots_per_state: Option<u64>,
}

impl TomographyPlan {
    pub fn exact(dim: usize) -> Self {
        Self { dim, shots_per_state: None }
    }

    pub fn sampled(dim: usize, shots_per_state: u64) -> Self {
        Self { dim, shots_per_state: Some(shots_per_state) }
    }

    pub fn n_states(&self) -> u64 {
        (self.dim * self.dim) as u64
    }

    /// Position of the `(i, j)` superposition probe within a block.
    fn pair_offset(dim: usize, i: usize, j: usize) -> usize {
        // Lexicographic over i < j: rows of decreasing length d-1, d-2, ...
        (0..i).map(|a| dim - 1 - a).sum::<usize>() + (j - i - 1)
    }

    /// The d² probe states: basis, then `(e_i + e_j)/√2`, then
    /// `(e_i + i·e_j)/√2`, both pair blocks in lexicographic `(i, j)` order.
    pub fn input_states(&self) -> Vec<PureState> {
        let d = self.dim;
        let inv = std::f64::consts::FRAC_1_SQRT_2;
        let mut states: Vec<PureState> = (0..d).map(|i| PureState::basis_state(d, i)).collect();
        for phase in [Complex64::new(inv, 0.0), Complex64::new(0.0, inv)] {
            for i in 0..d {
                for j in (i + 1)..d {
                    let mut amps = vec![Complex64::new(0.0, 0.0); d];
                    amps[i] = Complex64::new(inv, 0.0);
                    amps[j] = phase;
                    states.push(PureState::new(amps).expect("probe states are normalized"));
                }
            }
        }
        states
    }
}

/// What the baseline costs at dimension `d`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TomographyCost {
    pub states: u64,
    pub probabilities: u64,
    pub total_shots: u64,
}

/// `d²` probe states, `d³` probabilities, `d²·shots` total shots.
pub fn cost_model(dim: usize, shots_per_state: u64) -> TomographyCost {
    let d = dim as u64;
    TomographyCost { states: d * d, probabilities: d * d * d, total_shots: d * d * shots_per_state }
}

/// Which completeness repair ran.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepairKind {
    InverseSqrt,
    Additive,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ReconstructionDiagnostics {
    /// `‖Σ E_k − 𝟙‖_max` of the raw assembly.
    pub pre_completeness: f64,
    /// Same residual after repair.
    pub post_completeness: f64,
    /// Most negative raw eigenvalue across effects.
    pub worst_raw_eig: f64,
    pub repair: RepairKind,
}

/// A reconstructed POVM: the raw assembled effects, the repaired and
/// validated POVM, diagnostics, and the shots spent.
#[derive(Clone, Debug, Serialize)]
pub struct ReconstructedPovm {
    pub raw: Vec<ComplexMatrix>,
    pub povm: Povm,
    pub diagnostics: ReconstructionDiagnostics,
    pub total_shots: u64,
}

impl ReconstructedPovm {
    /// Largest entrywise deviation from a reference POVM.
    pub fn max_entry_error(&self, reference: &Povm) -> Result<f64> {
        if reference.dim() != self.povm.dim()
            || reference.n_effects() != self.povm.n_effects()
        {
            return Err(Error::DimMismatch {
                expected: self.povm.n_effects(),
                found: reference.n_effects(),
            });
        }
        let mut worst = 0.0f64;
        for (a, b) in self.povm.effects().iter().zip(reference.effects()) {
            worst = worst.max(a.sub(b).max_abs());
        }
        Ok(worst)
    }
}

/// Outcome-probability table for every probe: exact from the model, or
/// frequencies from `shots` draws smoothed by the add-one rule
/// `(n_k + 1)/(N + b)` over the `b` outcome bins.
fn probability_table(
    dev: &mut NoisyDevice,
    plan: &TomographyPlan,
    probes: &[PureState],
) -> Result<Vec<Vec<f64>>> {
    let mut table = Vec::with_capacity(probes.len());
    for probe in probes {
        let input = DensityMatrix::from_pure(probe);
        match plan.shots_per_state {
            None => table.push(dev.outcome_distribution(&input)?),
            Some(shots) => {
                if shots == 0 {
                    return Err(Error::ZeroTrials);
                }
                let counts = dev.measure_counts_chunked(&input, shots as usize, ExecMode::default())?;
                let bins = counts.len() as f64;
                table.push(
                    counts
                        .iter()
                        .map(|&n| (n as f64 + 1.0) / (shots as f64 + bins))
                        .collect(),
                );
            }
        }
    }
    Ok(table)
}

/// Assembles raw effects from the probability table.
fn assemble(dim: usize, n_effects: usize, table: &[Vec<f64>]) -> Vec<ComplexMatrix> {
    let pair_block = dim * (dim - 1) / 2;
    (0..n_effects)
        .map(|k| {
            let mut m = ComplexMatrix::zeros(dim);
            for i in 0..dim {
                m.set(i, i, Complex64::new(table[i][k], 0.0));
            }
            for i in 0..dim {
                for j in (i + 1)..dim {
                    let off = TomographyPlan::pair_offset(dim, i, j);
                    let t_plus = table[dim + off][k];
                    let t_imag = table[dim + pair_block + off][k];
                    let half = 0.5 * (table[i][k] + table[j][k]);
                    // t⁺ + i·t⁻ − (1+i)·(t_i + t_j)/2 = conj(E_ij).
                    let c = Complex64::new(t_plus - half, t_imag - half);
                    m.set(j, i, c);
                    m.set(i, j, c.conj());
                }
            }
            m
        })
        .collect()
}

/// Reconstructs the device's POVM from the plan's probe schedule. Shots are
/// drawn on the device itself, so its counter reflects the full cost.
pub fn reconstruct(dev: &mut NoisyDevice, plan: &TomographyPlan) -> Result<ReconstructedPovm> {
    if plan.dim != dev.dim() {
        return Err(Error::DimMismatch { expected: dev.dim(), found: plan.dim });
    }
    let shots_before = dev.shots();
    let probes = plan.input_states();
    let table = probability_table(dev, plan, &probes)?;
    let n_effects = dev.povm().n_effects();
    let raw = assemble(plan.dim, n_effects, &table);

    // Hermitize (exact no-op for the assembly, cheap insurance), then clip
    // negative eigenvalues.
    let mut worst_raw_eig = f64::INFINITY;
    let mut clipped = Vec::with_capacity(n_effects);
    for e in &raw {
        let eig = e.hermitize().eigh()?;
        worst_raw_eig = worst_raw_eig.min(eig.values.iter().fold(f64::INFINITY, |m, &v| m.min(v)));
        clipped.push(eig.rebuild(|v| v.max(0.0)));
    }

    let identity = ComplexMatrix::identity(plan.dim);
    let sum = clipped.iter().fold(ComplexMatrix::zeros(plan.dim), |acc, e| acc.add(e));
    let pre_completeness = sum.sub(&identity).max_abs();

    let (repaired, repair) = match sum.inv_sqrt_pd(SINGULAR_SUM_FLOOR) {
        Ok(s_inv_sqrt) => (
            clipped.iter().map(|e| s_inv_sqrt.matmul(e).matmul(&s_inv_sqrt).hermitize()).collect(),
            RepairKind::InverseSqrt,
        ),
        Err(_) => {
            let correction = identity.sub(&sum).scale(1.0 / n_effects as f64);
            (
                clipped.iter().map(|e| e.add(&correction)).collect::<Vec<_>>(),
                RepairKind::Additive,
            )
        }
    };

    let repaired_sum =
        repaired.iter().fold(ComplexMatrix::zeros(plan.dim), |acc: ComplexMatrix, e| acc.add(e));
    let post_completeness = repaired_sum.sub(&identity).max_abs();
    if post_completeness > 10.0 * pre_completeness + TOL_COMPLETE {
        return Err(Error::ProjectionFailed { pre: pre_completeness, post: post_completeness });
    }

    let povm = validate_povm(repaired)?;
    Ok(ReconstructedPovm {
        raw,
        povm,
        diagnostics: ReconstructionDiagnostics {
            pre_completeness,
            post_completeness,
            worst_raw_eig,
            repair,
        },
        total_shots: dev.shots() - shots_before,
    })
}

/// Convenience: the two diagonal quantities per index that the certified
/// bounds need, pulled from a reconstruction for comparison.
pub fn reconstructed_overlaps(rec: &ReconstructedPovm, pvm: &Rank1Pvm) -> Result<Vec<f64>> {
    if pvm.dim() != rec.povm.dim() {
        return Err(Error::DimMismatch { expected: rec.povm.dim(), found: pvm.dim() });
    }
    (0..pvm.dim().min(rec.povm.n_effects()))
        .map(|k| crate::quantum::overlap(pvm.state(k), rec.povm.effect(k)))
        .collect()
}
