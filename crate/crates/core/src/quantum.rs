//! Validated quantum domain types: pure states, density matrices, POVMs, and
//! rank-1 projective measurements.
//!
//! Construction is validation: a [`Povm`] only exists if its effects are PSD
//! and complete, a [`Rank1Pvm`] only if its basis is orthonormal. All types
//! are immutable once built and safe to share across threads.
//!
//! JSON schemas (floats round-trip bit-exactly):
//! * pure state: array of `[re, im]` amplitude pairs
//! * POVM: `{"dim": d, "effects": [matrix, ...]}` with matrices as row-major
//!   arrays of `[re, im]` entries
//! * PVM: `{"dim": d, "basis": [state, ...]}`

use num_complex::Complex64;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::linalg::ComplexMatrix;
use crate::{Error, Result, TOL_COMPLETE, TOL_HERM, TOL_PSD};

/// Numerical tolerances for validation; defaults suit double-precision
/// eigensolvers at dimension ≤ 32.
#[derive(Clone, Copy, Debug)]
pub struct Tolerances {
    /// Eigenvalues down to `-psd` count as nonnegative.
    pub psd: f64,
    /// Max-norm bound on `A − A†`.
    pub herm: f64,
    /// Max-norm bound on `Σ E_k − 𝟙`.
    pub complete: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { psd: TOL_PSD, herm: TOL_HERM, complete: TOL_COMPLETE }
    }
}

fn pairs_from(amps: &[Complex64]) -> Vec<[f64; 2]> {
    amps.iter().map(|z| [z.re, z.im]).collect()
}

fn amps_from(pairs: Vec<[f64; 2]>) -> Vec<Complex64> {
    pairs.into_iter().map(|[re, im]| Complex64::new(re, im)).collect()
}

/// A normalized state vector on a d-dimensional Hilbert space.
#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    amps: Vec<Complex64>,
}

impl PureState {
    /// Accepts an already-normalized amplitude vector (‖·‖₂ = 1 within 1e-10).
    pub fn new(amps: Vec<Complex64>) -> Result<Self> {
        let norm = amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::NotNormalized { norm });
        }
        Ok(Self { amps })
    }

    /// Normalizes an arbitrary nonzero vector.
    pub fn normalized(amps: Vec<Complex64>) -> Result<Self> {
        let norm = amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm <= 0.0 || !norm.is_finite() {
            return Err(Error::NotNormalized { norm });
        }
        Ok(Self { amps: amps.into_iter().map(|z| z / norm).collect() })
    }

    /// Computational basis vector `|k⟩`.
    pub fn basis_state(dim: usize, k: usize) -> Self {
        let mut amps = vec![Complex64::new(0.0, 0.0); dim];
        amps[k] = Complex64::new(1.0, 0.0);
        Self { amps }
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &Self) -> Complex64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum()
    }

    /// `|⟨self|other⟩|²`.
    pub fn prob_overlap(&self, other: &Self) -> f64 {
        self.inner(other).norm_sqr()
    }

    /// `|ψ⟩⟨ψ|`.
    pub fn projector(&self) -> ComplexMatrix {
        ComplexMatrix::from_fn(self.dim(), |r, c| self.amps[r] * self.amps[c].conj())
    }
}

impl Serialize for PureState {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        pairs_from(&self.amps).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for PureState {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let amps = amps_from(Vec::deserialize(deserializer)?);
        PureState::new(amps).map_err(D::Error::custom)
    }
}

/// A density matrix: Hermitian, unit trace, PSD (all within tolerance).
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    m: ComplexMatrix,
}

impl DensityMatrix {
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        Self::with_tolerances(m, &Tolerances::default())
    }

    pub fn with_tolerances(m: ComplexMatrix, tol: &Tolerances) -> Result<Self> {
        let residual = m.herm_residual();
        if residual > tol.herm {
            return Err(Error::NotHermitian { residual });
        }
        let trace = m.trace().re;
        if (trace - 1.0).abs() > 1e-10 {
            return Err(Error::NotUnitTrace { trace });
        }
        let min_eig = m.min_eigenvalue()?;
        if min_eig < -tol.psd {
            return Err(Error::NotPsd { index: 0, min_eig });
        }
        Ok(Self { m })
    }

    pub fn from_pure(psi: &PureState) -> Self {
        Self { m: psi.projector() }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self { m: ComplexMatrix::identity(dim).scale(1.0 / dim as f64) }
    }

    /// Convex combination `Σ w_i ρ_i`; valid by convexity, so no re-validation.
    pub fn mixture(parts: &[(f64, &DensityMatrix)]) -> Self {
        let dim = parts[0].1.dim();
        let mut m = ComplexMatrix::zeros(dim);
        for (w, rho) in parts {
            m = m.add(&rho.m.scale(*w));
        }
        Self { m }
    }

    pub fn dim(&self) -> usize {
        self.m.dim()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.m
    }
}

impl Serialize for DensityMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.m.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for DensityMatrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        DensityMatrix::new(ComplexMatrix::deserialize(deserializer)?).map_err(D::Error::custom)
    }
}

/// Validation diagnostics kept alongside a [`Povm`]: how close the worst
/// effect came to losing positivity, and the completeness residual.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct PovmDiagnostics {
    pub worst_min_eig: f64,
    pub completeness_residual: f64,
}

/// A positive operator-valued measure: effects `E_k ≥ 0` with `Σ E_k = 𝟙`.
#[derive(Clone, Debug)]
pub struct Povm {
    dim: usize,
    effects: Vec<ComplexMatrix>,
    diagnostics: PovmDiagnostics,
}

/// Validates a set of effects as a POVM under default tolerances.
pub fn validate_povm(effects: Vec<ComplexMatrix>) -> Result<Povm> {
    validate_povm_with(effects, &Tolerances::default())
}

/// Validates a set of effects as a POVM, reporting the worst violation.
pub fn validate_povm_with(effects: Vec<ComplexMatrix>, tol: &Tolerances) -> Result<Povm> {
    if effects.is_empty() {
        return Err(Error::DimMismatch { expected: 1, found: 0 });
    }
    let dim = effects[0].dim();
    let mut worst_min_eig = f64::INFINITY;
    let mut worst_index = 0;
    let mut sum = ComplexMatrix::zeros(dim);
    for (index, e) in effects.iter().enumerate() {
        if e.dim() != dim {
            return Err(Error::DimMismatch { expected: dim, found: e.dim() });
        }
        let residual = e.herm_residual();
        if residual > tol.herm {
            return Err(Error::NotHermitian { residual });
        }
        let min_eig = e.min_eigenvalue()?;
        if min_eig < worst_min_eig {
            worst_min_eig = min_eig;
            worst_index = index;
        }
        sum = sum.add(e);
    }
    if worst_min_eig < -tol.psd {
        return Err(Error::NotPsd { index: worst_index, min_eig: worst_min_eig });
    }
    let completeness_residual = sum.sub(&ComplexMatrix::identity(dim)).max_abs();
    if completeness_residual > tol.complete {
        return Err(Error::NotComplete { residual: completeness_residual });
    }
    Ok(Povm { dim, effects, diagnostics: PovmDiagnostics { worst_min_eig, completeness_residual } })
}

impl Povm {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_effects(&self) -> usize {
        self.effects.len()
    }

    pub fn effects(&self) -> &[ComplexMatrix] {
        &self.effects
    }

    pub fn effect(&self, k: usize) -> &ComplexMatrix {
        &self.effects[k]
    }

    pub fn diagnostics(&self) -> PovmDiagnostics {
        self.diagnostics
    }

    /// Outcome probabilities `r_k = tr(E_k σ)` (raw, unclipped).
    pub fn outcome_probabilities(&self, sigma: &DensityMatrix) -> Vec<f64> {
        self.effects.iter().map(|e| e.trace_product(sigma.matrix()).re).collect()
    }
}

#[derive(Serialize, Deserialize)]
struct PovmSchema {
    dim: usize,
    effects: Vec<ComplexMatrix>,
}

impl Serialize for Povm {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        PovmSchema { dim: self.dim, effects: self.effects.clone() }.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Povm {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = PovmSchema::deserialize(deserializer)?;
        for e in &raw.effects {
            if e.dim() != raw.dim {
                return Err(D::Error::custom(Error::DimMismatch {
                    expected: raw.dim,
                    found: e.dim(),
                }));
            }
        }
        validate_povm(raw.effects).map_err(D::Error::custom)
    }
}

/// A rank-1 projective measurement given by an orthonormal basis
/// `{|ψ_k⟩}`, with projectors `Π_k = |ψ_k⟩⟨ψ_k|`.
#[derive(Clone, Debug)]
pub struct Rank1Pvm {
    basis: Vec<PureState>,
}

impl Rank1Pvm {
    /// Requires `dim` pairwise-orthonormal states (Gram = identity within 1e-10).
    pub fn new(basis: Vec<PureState>) -> Result<Self> {
        let dim = basis.len();
        let mut residual: f64 = 0.0;
        for i in 0..dim {
            if basis[i].dim() != dim {
                return Err(Error::DimMismatch { expected: dim, found: basis[i].dim() });
            }
            for j in 0..dim {
                let gram = basis[i].inner(&basis[j]);
                let target = if i == j { 1.0 } else { 0.0 };
                residual = residual.max((gram - target).norm());
            }
        }
        if residual > 1e-10 {
            return Err(Error::NotOrthonormal { residual });
        }
        Ok(Self { basis })
    }

    /// The computational basis `{|0⟩, …, |d-1⟩}`.
    pub fn computational(dim: usize) -> Self {
        Self { basis: (0..dim).map(|k| PureState::basis_state(dim, k)).collect() }
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[PureState] {
        &self.basis
    }

    pub fn state(&self, k: usize) -> &PureState {
        &self.basis[k]
    }

    pub fn projector(&self, k: usize) -> ComplexMatrix {
        self.basis[k].projector()
    }

    /// The PVM viewed as a POVM (projectors as effects).
    pub fn as_povm(&self) -> Povm {
        validate_povm((0..self.dim()).map(|k| self.projector(k)).collect())
            .expect("orthonormal projectors always form a POVM")
    }
}

#[derive(Serialize, Deserialize)]
struct PvmSchema {
    dim: usize,
    basis: Vec<PureState>,
}

impl Serialize for Rank1Pvm {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        PvmSchema { dim: self.dim(), basis: self.basis.clone() }.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Rank1Pvm {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = PvmSchema::deserialize(deserializer)?;
        if raw.basis.len() != raw.dim {
            return Err(D::Error::custom(Error::DimMismatch {
                expected: raw.dim,
                found: raw.basis.len(),
            }));
        }
        Rank1Pvm::new(raw.basis).map_err(D::Error::custom)
    }
}

/// Uhlmann fidelity between two states: `(tr √(√a · b · √a))²`.
///
/// Symmetric in its arguments within 1e-9; equals `tr(a·b)` whenever either
/// argument is pure.
pub fn state_fidelity(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimMismatch { expected: a.dim(), found: b.dim() });
    }
    let ra = a.matrix().sqrt_psd()?;
    let inner = ra.matmul(b.matrix()).matmul(&ra).hermitize();
    let eig = inner.eigh()?;
    // Eigenvalues of rank-deficient products carry O(ε)·λ_max rounding dust
    // that the square root would amplify to ~1e-8; floor it to zero.
    let lmax = eig.values.iter().fold(0.0f64, |m, &v| m.max(v));
    let floor = 32.0 * f64::EPSILON * a.dim() as f64 * lmax;
    let s: f64 = eig.values.iter().map(|&v| if v > floor { v.sqrt() } else { 0.0 }).sum();
    let value = s * s;
    if value > 1.0 + 1e-6 {
        return Err(Error::NumericalFailure { what: format!("fidelity {value} exceeds 1") });
    }
    Ok(value.clamp(0.0, 1.0))
}

/// `⟨ψ|m|ψ⟩` for a Hermitian operator; the imaginary residual is below
/// 1e-10 by Hermiticity.
pub fn overlap(psi: &PureState, m: &ComplexMatrix) -> Result<f64> {
    if psi.dim() != m.dim() {
        return Err(Error::DimMismatch { expected: psi.dim(), found: m.dim() });
    }
    let residual = m.herm_residual();
    if residual > TOL_HERM {
        return Err(Error::NotHermitian { residual });
    }
    Ok(m.expectation(psi.amplitudes()).re)
}

/// Test fixture shared across the crate: the two-effect qubit family
/// `E_0 = [[u0, γ], [γ*, 1-u0]]`, `E_1 = 𝟙 - E_0`.
#[cfg(test)]
pub(crate) fn qubit_effect_pair(u0: f64, gamma: Complex64) -> Vec<ComplexMatrix> {
    let e0 = ComplexMatrix::from_rows(&[
        vec![Complex64::new(u0, 0.0), gamma],
        vec![gamma.conj(), Complex64::new(1.0 - u0, 0.0)],
    ])
    .unwrap();
    let e1 = ComplexMatrix::identity(2).sub(&e0);
    vec![e0, e1]
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_pure(d: usize, rng: &mut StdRng) -> PureState {
        let amps: Vec<Complex64> =
            (0..d).map(|_| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect();
        PureState::normalized(amps).unwrap()
    }

    fn random_mixed(d: usize, rng: &mut StdRng) -> DensityMatrix {
        let g = ComplexMatrix::from_fn(d, |_, _| {
            c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        let gg = g.matmul(&g.adjoint());
        let m = gg.scale(1.0 / gg.trace().re);
        DensityMatrix::new(m).unwrap()
    }

    #[test]
    fn identity_alone_is_a_valid_povm() {
        let p = validate_povm(vec![ComplexMatrix::identity(3)]).unwrap();
        assert_eq!(p.n_effects(), 1);
        assert!(p.diagnostics().completeness_residual < 1e-15);
    }

    #[test]
    fn coherence_within_radius_is_valid_beyond_is_not() {
        // PSD boundary for u0 = 0.99 is |γ| = √(0.99·0.01) ≈ 0.09950.
        let ok = validate_povm(qubit_effect_pair(0.99, c(0.09, 0.0)));
        assert!(ok.is_ok());
        let bad = validate_povm(qubit_effect_pair(0.99, c(0.2, 0.0)));
        // Characteristic-polynomial check: eigenvalues 0.5 ± √(0.49² + 0.04),
        // so the smaller one is ≈ −0.0292.
        match bad {
            Err(Error::NotPsd { min_eig, .. }) => {
                let oracle = 0.5 - (0.49f64 * 0.49 + 0.04).sqrt();
                assert!((min_eig - oracle).abs() < 1e-12);
            }
            other => panic!("expected NotPsd, got {other:?}"),
        }
    }

    #[test]
    fn incomplete_effects_are_rejected() {
        let e = ComplexMatrix::identity(2).scale(0.4);
        match validate_povm(vec![e.clone(), e]) {
            Err(Error::NotComplete { residual }) => assert!((residual - 0.2).abs() < 1e-12),
            other => panic!("expected NotComplete, got {other:?}"),
        }
    }

    #[test]
    fn fidelity_trivial_cases() {
        let mut rng = StdRng::seed_from_u64(3);
        let rho = random_mixed(3, &mut rng);
        assert!((state_fidelity(&rho, &rho).unwrap() - 1.0).abs() < 1e-9);

        let pvm = Rank1Pvm::computational(2);
        let p0 = DensityMatrix::from_pure(pvm.state(0));
        let p1 = DensityMatrix::from_pure(pvm.state(1));
        assert!(state_fidelity(&p0, &p1).unwrap() < 1e-12);
        let half = DensityMatrix::maximally_mixed(2);
        assert!((state_fidelity(&p0, &half).unwrap() - 0.5).abs() < 1e-10);
    }

    #[test]
    fn fidelity_is_symmetric_and_matches_trace_form_on_pure_inputs() {
        let mut rng = StdRng::seed_from_u64(5);
        for d in [2, 3, 4] {
            let psi = random_pure(d, &mut rng);
            let pure = DensityMatrix::from_pure(&psi);
            let mixed = random_mixed(d, &mut rng);
            let f_ab = state_fidelity(&pure, &mixed).unwrap();
            let f_ba = state_fidelity(&mixed, &pure).unwrap();
            assert!((f_ab - f_ba).abs() < 1e-9, "d={d}");
            let trace_form = pure.matrix().trace_product(mixed.matrix()).re;
            assert!((f_ab - trace_form).abs() < 1e-9, "d={d}");
        }
    }

    #[test]
    fn overlap_examples() {
        let pvm = Rank1Pvm::computational(2);
        let pi0 = pvm.projector(0);
        assert!((overlap(pvm.state(0), &pi0).unwrap() - 1.0).abs() < 1e-12);

        let effects = qubit_effect_pair(0.99, c(0.0, 0.0));
        assert!((overlap(pvm.state(0), &effects[0]).unwrap() - 0.99).abs() < 1e-12);

        let plus = PureState::normalized(vec![c(1.0, 0.0), c(1.0, 0.0)]).unwrap();
        assert!((overlap(&plus, &pi0).unwrap() - 0.5).abs() < 1e-12);

        let mut skew = ComplexMatrix::zeros(2);
        skew.set(0, 1, c(1.0, 0.0));
        assert!(matches!(overlap(&plus, &skew), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn pvm_projectors_resolve_the_identity() {
        let mut rng = StdRng::seed_from_u64(9);
        // Random orthonormal basis via Gram-Schmidt on random vectors.
        let d = 4;
        let mut basis: Vec<Vec<Complex64>> = Vec::new();
        while basis.len() < d {
            let mut v: Vec<Complex64> =
                (0..d).map(|_| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect();
            for b in &basis {
                let proj: Complex64 = b.iter().zip(&v).map(|(x, y)| x.conj() * y).sum();
                for i in 0..d {
                    v[i] -= proj * b[i];
                }
            }
            let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if norm > 1e-3 {
                basis.push(v.into_iter().map(|z| z / norm).collect());
            }
        }
        let pvm =
            Rank1Pvm::new(basis.into_iter().map(|v| PureState::new(v).unwrap()).collect()).unwrap();
        let mut sum = ComplexMatrix::zeros(d);
        for k in 0..d {
            sum = sum.add(&pvm.projector(k));
        }
        assert!(sum.sub(&ComplexMatrix::identity(d)).max_abs() < 1e-9);
        assert!(pvm.as_povm().diagnostics().completeness_residual < 1e-9);
    }

    #[test]
    fn non_orthonormal_basis_is_rejected() {
        let s0 = PureState::basis_state(2, 0);
        let plus = PureState::normalized(vec![c(1.0, 0.0), c(1.0, 0.0)]).unwrap();
        assert!(matches!(Rank1Pvm::new(vec![s0, plus]), Err(Error::NotOrthonormal { .. })));
    }

    #[test]
    fn density_matrix_rejects_bad_trace_and_negativity() {
        let double = ComplexMatrix::identity(2);
        assert!(matches!(DensityMatrix::new(double), Err(Error::NotUnitTrace { .. })));
        let neg = ComplexMatrix::from_rows(&[
            vec![c(1.5, 0.0), c(0.0, 0.0)],
            vec![c(0.0, 0.0), c(-0.5, 0.0)],
        ])
        .unwrap();
        assert!(matches!(DensityMatrix::new(neg), Err(Error::NotPsd { .. })));
    }

    #[test]
    fn povm_json_round_trip_is_bit_exact_and_validating() {
        let povm = validate_povm(qubit_effect_pair(0.99, c(0.05, 0.03))).unwrap();
        let text = serde_json::to_string(&povm).unwrap();
        let back: Povm = serde_json::from_str(&text).unwrap();
        let text2 = serde_json::to_string(&back).unwrap();
        assert_eq!(text, text2);

        let invalid = r#"{"dim":2,"effects":[[[[0.4,0.0],[0.0,0.0]],[[0.0,0.0],[0.4,0.0]]]]}"#;
        assert!(serde_json::from_str::<Povm>(invalid).is_err());
    }

    #[test]
    fn tolerance_override_changes_acceptance() {
        // Slightly incomplete POVM: passes only with a loosened tolerance.
        let e = ComplexMatrix::identity(2).scale(0.5 - 5e-7);
        let effects = vec![e.clone(), e];
        assert!(validate_povm(effects.clone()).is_err());
        let loose = Tolerances { complete: 1e-5, ..Tolerances::default() };
        assert!(validate_povm_with(effects, &loose).is_ok());
    }
}
