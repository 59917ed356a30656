//! Single-qubit validity analysis of the closed-form lower bound.
//!
//! The bound's derivation hinges on the pointwise comparison, for `l ≠ m`,
//! of `f = √(p_l r_l p_m r_m)` against `g = √(u_l u_m) p_l p_m`. Without
//! coherence (`E_k` diagonal in the reference basis) `f ≥ g` everywhere.
//! Coherence opens deficit regions where it can fail, studied here on the
//! two-effect family
//!
//! `E₀ = [[u₀, γ], [γ*, 1−u₀]]`, `E₁ = 𝟙 − E₀`, `|γ| ≤ √(u₀(1−u₀))`.
//!
//! Writing `c = 1 − u₀ = tr(E₀Π₁) = tr(E₁Π₀)` and taking `γ` real positive
//! (a diagonal-unitary rotation removes its phase without touching any
//! quantity below), the deficit region of index 0 is exactly
//!
//! `A₀ = {φ ∈ (π/2, 3π/2), θ < 2·arccot(c/(2γ|cos φ|))}`,
//!
//! its mirror for index 1, and both have Haar measure
//! `¼ − (1/4π)∫(c² − 4γ²cos²φ)/(c² + 4γ²cos²φ) dφ`. The integrated deficit
//! on each region is bounded by
//! `δ = (√(u₀u₁)/2π)·∫[4γ²cos²φ/(4γ²cos²φ + c²)]² dφ`, so
//! `∫_{(A₀∪A₁)ᶜ}(f − g) ≥ δ₀ + δ₁` suffices for the bound to hold — a
//! one-sided test: its failure proves nothing, and the exact sweeps here
//! find no violation anywhere on the family.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::exec::ExecMode;
use crate::haar::{bloch_integrate_in, gauss_legendre, BlochQuadrature};
use crate::linalg::ComplexMatrix;
use crate::metrics::{
    avg_fidelity_probs_in, lower_bound_probs, BoundInputs, Integrator,
};
use crate::quantum::{validate_povm, overlap, Povm, PureState, Rank1Pvm};
use crate::{Error, Result};

/// Nodes for the one-dimensional φ-integrals; doubled once for an error
/// check.
const PHI_NODES: usize = 2048;

/// `arccot` on the branch `(0, π)`.
fn arccot(x: f64) -> f64 {
    FRAC_PI_2 - x.atan()
}

/// The two-effect qubit family with one coherent defect.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct CoherentQubitPovm {
    u0: f64,
    gamma: Complex64,
}

impl CoherentQubitPovm {
    /// Requires `u₀ ∈ [1/2, 1]` and `|γ| ≤ √(u₀(1−u₀))` (both effects PSD).
    pub fn new(u0: f64, gamma: Complex64) -> Result<Self> {
        if !(0.5..=1.0).contains(&u0) {
            return Err(Error::OutOfRange { what: "u0", value: u0 });
        }
        if !gamma.re.is_finite() || !gamma.im.is_finite() {
            return Err(Error::OutOfRange { what: "gamma", value: f64::NAN });
        }
        if gamma.norm_sqr() > u0 * (1.0 - u0) + 1e-12 {
            return Err(Error::OutOfRange { what: "gamma magnitude", value: gamma.norm() });
        }
        Ok(Self { u0, gamma })
    }

    pub fn u0(&self) -> f64 {
        self.u0
    }

    pub fn gamma(&self) -> Complex64 {
        self.gamma
    }

    /// Largest admissible `|γ|` at this `u₀`.
    pub fn r_max(&self) -> f64 {
        (self.u0 * (1.0 - self.u0)).sqrt()
    }

    /// `c = tr(E₀Π₁) = tr(E₁Π₀) = 1 − u₀`, the diagonal leakage shared by
    /// both effects.
    pub fn leakage(&self) -> f64 {
        1.0 - self.u0
    }

    pub fn effects(&self) -> Vec<ComplexMatrix> {
        let e0 = ComplexMatrix::from_rows(&[
            vec![Complex64::new(self.u0, 0.0), self.gamma],
            vec![self.gamma.conj(), Complex64::new(1.0 - self.u0, 0.0)],
        ])
        .expect("family entries are finite");
        let e1 = ComplexMatrix::identity(2).sub(&e0);
        vec![e0, e1]
    }

    pub fn povm(&self) -> Result<Povm> {
        validate_povm(self.effects())
    }

    /// The same family with `γ` rotated onto the positive real axis, plus
    /// the rotation angle `arg γ` that was removed. The rotation is the
    /// diagonal unitary `diag(1, e^{i·arg γ})`, which commutes with every
    /// `Π_k`, so overlaps, fidelities, bounds, and region measures are all
    /// unchanged by it.
    pub fn phase_rotated(&self) -> (Self, f64) {
        let arg = if self.gamma.norm() == 0.0 { 0.0 } else { self.gamma.arg() };
        (Self { u0: self.u0, gamma: Complex64::new(self.gamma.norm(), 0.0) }, arg)
    }

    /// `r₀(θ, φ) = ⟨ψ(θ,φ)|E₀|ψ(θ,φ)⟩` for
    /// `ψ(θ,φ) = cos(θ/2)|0⟩ + e^{iφ}sin(θ/2)|1⟩`.
    pub fn r0(&self, theta: f64, phi: f64) -> f64 {
        let (half_sin, half_cos) = (0.5 * theta).sin_cos();
        self.u0 * half_cos * half_cos
            + (1.0 - self.u0) * half_sin * half_sin
            + (self.gamma * Complex64::from_polar(1.0, phi)).re * theta.sin()
    }

    /// Membership in the deficit region of index `j`, decided by the sign
    /// of `⟨ψ|E_j − u_j Π_j|ψ⟩` itself (not the analytic envelope).
    pub fn region_membership(&self, j: usize, theta: f64, phi: f64) -> Result<bool> {
        let (half_sin, half_cos) = (0.5 * theta).sin_cos();
        let coherent = (self.gamma * Complex64::from_polar(1.0, phi)).re;
        let c = 1.0 - self.u0;
        let value = match j {
            0 => half_sin * (c * half_sin + 2.0 * coherent * half_cos),
            1 => half_cos * (c * half_cos - 2.0 * coherent * half_sin),
            _ => return Err(Error::OutOfRange { what: "region index", value: j as f64 }),
        };
        Ok(value < 0.0)
    }

    /// The analytic envelope certified to contain the deficit region of
    /// index `j`. Stated for real positive `γ`; a complex phase shifts the
    /// envelope along φ by `−arg γ`, which this accounts for.
    pub fn envelope_contains(&self, j: usize, theta: f64, phi: f64) -> Result<bool> {
        if j > 1 {
            return Err(Error::OutOfRange { what: "region index", value: j as f64 });
        }
        let gamma_abs = self.gamma.norm();
        if gamma_abs == 0.0 {
            return Ok(false);
        }
        let x = (phi + self.gamma.arg()).cos();
        let c = 1.0 - self.u0;
        Ok(match j {
            0 => x < 0.0 && theta <= 2.0 * arccot(c / (2.0 * gamma_abs * (-x))) + 1e-12,
            _ => x > 0.0 && theta + 1e-12 >= 2.0 * (c / (2.0 * gamma_abs * x)).atan(),
        })
    }
}

/// Everything the region analysis produces. The measures and `δ` terms are
/// φ-integrals of the closed forms; `*_exact` masks the quadrature grid
/// with [`CoherentQubitPovm::region_membership`]; `lhs` integrates `f − g`
/// over the complement of both regions. `sufficient_ok` reports the
/// one-sided test `lhs ≥ δ₀ + δ₁`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct RegionReport {
    pub mu_a0_bound: f64,
    pub mu_a1_bound: f64,
    pub mu_a0_exact: f64,
    pub mu_a1_exact: f64,
    pub delta0: f64,
    pub delta1: f64,
    pub lhs: f64,
    pub sufficient_ok: bool,
    /// `arg γ` rotated out before the analysis.
    pub phase_rotation: f64,
}

/// `(1/2π)·∫_{π/2}^{3π/2} h(cos²φ) dφ` by Gauss-Legendre with one doubling;
/// the doubled value is returned (the pair differ below 1e-12 for every
/// family member).
fn phi_integral(h: impl Fn(f64) -> f64) -> f64 {
    let mut out = 0.0;
    for n in [PHI_NODES, 2 * PHI_NODES] {
        let (xs, ws) = gauss_legendre(n);
        // Map [-1, 1] onto [π/2, 3π/2]: φ = π + x·π/2, dφ = (π/2)dx.
        let mut total = 0.0;
        for (x, w) in xs.iter().zip(&ws) {
            let phi = PI + x * FRAC_PI_2;
            let cos2 = phi.cos().powi(2);
            total += w * h(cos2);
        }
        out = total * FRAC_PI_2 / (2.0 * PI);
    }
    out
}

/// Full region analysis: measure bounds, masked-quadrature measures, the
/// `δ` deficit budgets, the complement integral, and the sufficient-
/// condition verdict. The family's phase is rotated out first and reported.
pub fn sufficient_condition(
    family: &CoherentQubitPovm,
    quad: &BlochQuadrature,
) -> Result<RegionReport> {
    sufficient_condition_in(family, quad, ExecMode::default())
}

/// [`sufficient_condition`] with an explicit execution mode.
pub fn sufficient_condition_in(
    family: &CoherentQubitPovm,
    quad: &BlochQuadrature,
    mode: ExecMode,
) -> Result<RegionReport> {
    let (rot, phase_rotation) = family.phase_rotated();
    let gamma = rot.gamma.re;
    let u0 = rot.u0;
    let c = rot.leakage();

    // μ(A_j) = ¼ − (1/2π)∫ half·(c² − 4γ²cos²φ)/(c² + 4γ²cos²φ) dφ over a
    // half period; identical for both regions since c₀ = c₁.
    let mu_bound = if gamma == 0.0 {
        0.0
    } else {
        0.25 - 0.5
            * phi_integral(|cos2| {
                let num = c * c - 4.0 * gamma * gamma * cos2;
                num / (c * c + 4.0 * gamma * gamma * cos2)
            })
    };

    // δ_j = (√(u₀u₁)/2π)∫[4γ²cos²φ/(4γ²cos²φ + c²)]² dφ, with u₁ = u₀.
    let delta = if gamma == 0.0 {
        0.0
    } else {
        u0 * phi_integral(|cos2| {
            let t = 4.0 * gamma * gamma * cos2;
            let ratio = t / (t + c * c);
            ratio * ratio
        })
    };

    let membership_measure = |j: usize| -> Result<f64> {
        let est = bloch_integrate_in(
            |theta, phi| {
                if rot.region_membership(j, theta, phi).expect("j is 0 or 1") {
                    1.0
                } else {
                    0.0
                }
            },
            quad,
            mode,
        )?;
        Ok(est.value)
    };
    let mu_a0_exact = membership_measure(0)?;
    let mu_a1_exact = membership_measure(1)?;

    // f − g on the complement of both regions; nonnegative pointwise there.
    let lhs = bloch_integrate_in(
        |theta, phi| {
            let in_a0 = rot.region_membership(0, theta, phi).expect("index 0");
            let in_a1 = rot.region_membership(1, theta, phi).expect("index 1");
            if in_a0 || in_a1 {
                return 0.0;
            }
            let half = 0.5 * theta;
            let p0 = half.cos().powi(2);
            let p1 = 1.0 - p0;
            let r0 = rot.r0(theta, phi).max(0.0);
            let r1 = (1.0 - r0).max(0.0);
            (p0 * r0 * p1 * r1).sqrt() - u0 * p0 * p1
        },
        quad,
        mode,
    )?
    .value;

    Ok(RegionReport {
        mu_a0_bound: mu_bound,
        mu_a1_bound: mu_bound,
        mu_a0_exact,
        mu_a1_exact,
        delta0: delta,
        delta1: delta,
        lhs,
        sufficient_ok: lhs >= delta + delta,
        phase_rotation,
    })
}

/// The measure-focused entry point; same computation as
/// [`sufficient_condition`], kept for call sites that only read the
/// measure fields.
pub fn measure_bounds(family: &CoherentQubitPovm, quad: &BlochQuadrature) -> Result<RegionReport> {
    sufficient_condition(family, quad)
}

/// Pointwise `f_{l,m} − g_{l,m}` for any dimension:
/// `√(p_l r_l p_m r_m) − √(u_l u_m)·p_l p_m` at `ψ`.
pub fn fg_gap(
    pvm: &Rank1Pvm,
    povm: &Povm,
    l: usize,
    m: usize,
    psi: &PureState,
) -> Result<f64> {
    if pvm.dim() != povm.dim() || psi.dim() != pvm.dim() {
        return Err(Error::DimMismatch { expected: pvm.dim(), found: psi.dim() });
    }
    if l == m || l >= povm.n_effects() || m >= povm.n_effects() || l >= pvm.dim() || m >= pvm.dim()
    {
        return Err(Error::OutOfRange { what: "pair indices", value: l.max(m) as f64 });
    }
    let p_l = pvm.state(l).prob_overlap(psi);
    let p_m = pvm.state(m).prob_overlap(psi);
    let r_l = povm.effect(l).expectation(psi.amplitudes()).re.max(0.0);
    let r_m = povm.effect(m).expectation(psi.amplitudes()).re.max(0.0);
    let u_l = overlap(pvm.state(l), povm.effect(l))?.max(0.0);
    let u_m = overlap(pvm.state(m), povm.effect(m))?.max(0.0);
    Ok((p_l * r_l * p_m * r_m).sqrt() - (u_l * u_m).sqrt() * p_l * p_m)
}

/// One sweep point: the exact average fidelity against the closed-form
/// bounds. `ub = 1 − lb` bounds the average error; `gap = F̄ − lb`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SweepRow {
    pub u0: f64,
    pub gamma_abs: f64,
    pub f_exact: f64,
    pub lb: f64,
    pub ub: f64,
    pub gap: f64,
    /// Quadrature error estimate on `f_exact`.
    pub f_err: f64,
}

/// Evenly spaced fractions of `R_max`, endpoints included.
pub fn uniform_fractions(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n).map(|i| i as f64 / (n - 1) as f64).collect(),
    }
}

fn family_row(
    u0: f64,
    gamma_abs: f64,
    pvm: &Rank1Pvm,
    quad: &BlochQuadrature,
    mode: ExecMode,
) -> Result<SweepRow> {
    let family = CoherentQubitPovm::new(u0, Complex64::new(gamma_abs, 0.0))?;
    let f = avg_fidelity_probs_in(
        pvm,
        &family.povm()?,
        &Integrator::Quadrature(*quad),
        mode,
    )?;
    let lb = lower_bound_probs(&BoundInputs::probs(vec![u0, u0]))?;
    Ok(SweepRow {
        u0,
        gamma_abs,
        f_exact: f.value,
        lb,
        ub: 1.0 - lb,
        gap: f.value - lb,
        f_err: f.std_err,
    })
}

/// Exact-fidelity sweep over the family: for each `u₀`, `gamma_points`
/// evenly spaced values of `|γ|` on `[0, R_max]`. Rows are ordered by
/// `u₀` then `|γ|` regardless of execution mode.
pub fn sweep_gap_table(
    quad: &BlochQuadrature,
    u0_values: &[f64],
    gamma_points: usize,
) -> Result<Vec<SweepRow>> {
    sweep_gap_table_in(quad, u0_values, gamma_points, ExecMode::default())
}

/// [`sweep_gap_table`] with an explicit execution mode.
pub fn sweep_gap_table_in(
    quad: &BlochQuadrature,
    u0_values: &[f64],
    gamma_points: usize,
    mode: ExecMode,
) -> Result<Vec<SweepRow>> {
    if gamma_points == 0 {
        return Err(Error::OutOfRange { what: "gamma_points", value: 0.0 });
    }
    let pvm = Rank1Pvm::computational(2);
    let mut rows = Vec::with_capacity(u0_values.len() * gamma_points);
    for &u0 in u0_values {
        let r_max = (u0 * (1.0 - u0)).sqrt();
        for frac in uniform_fractions(gamma_points) {
            rows.push(family_row(u0, frac * r_max, &pvm, quad, mode)?);
        }
    }
    Ok(rows)
}

/// Outcome of a violation scan: any row with `F̄ < lb − tol` (where `tol`
/// is five times that row's quadrature error estimate), and the worst
/// signed margin `lb − F̄` seen anywhere (negative when the bound always
/// held with room).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScanReport {
    pub violations: Vec<SweepRow>,
    pub max_negative_gap: f64,
    pub rows_scanned: usize,
}

/// Scans `u0_grid × (fractions of R_max)` for lower-bound violations.
pub fn violation_scan(
    u0_grid: &[f64],
    gamma_fractions: &[f64],
    quad: &BlochQuadrature,
) -> Result<ScanReport> {
    violation_scan_in(u0_grid, gamma_fractions, quad, ExecMode::default())
}

/// [`violation_scan`] with an explicit execution mode.
pub fn violation_scan_in(
    u0_grid: &[f64],
    gamma_fractions: &[f64],
    quad: &BlochQuadrature,
    mode: ExecMode,
) -> Result<ScanReport> {
    let pvm = Rank1Pvm::computational(2);
    let mut violations = Vec::new();
    let mut max_negative_gap = f64::NEG_INFINITY;
    let mut rows_scanned = 0;
    for &u0 in u0_grid {
        let r_max = (u0 * (1.0 - u0)).sqrt();
        for &frac in gamma_fractions {
            if !(0.0..=1.0).contains(&frac) {
                return Err(Error::OutOfRange { what: "gamma fraction", value: frac });
            }
            let row = family_row(u0, frac * r_max, &pvm, quad, mode)?;
            rows_scanned += 1;
            max_negative_gap = max_negative_gap.max(-row.gap);
            if row.gap < -5.0 * row.f_err {
                violations.push(row);
            }
        }
    }
    Ok(ScanReport { violations, max_negative_gap, rows_scanned })
}

/// The default desk-scale scan grid: `u₀` from 0.50 to 0.99 in steps of
/// 0.01.
pub fn desk_scan_grid() -> Vec<f64> {
    (0..50).map(|i| 0.5 + 0.01 * i as f64).collect()
}
