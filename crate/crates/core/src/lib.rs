//! Average measurement fidelity for noisy quantum measurements.
//!
//! An ideal measurement of a d-dimensional system is a rank-1 projective
//! measurement `{Π_k = |ψ_k⟩⟨ψ_k|}`; a real device implements some POVM
//! `{E_k}` (positive effects summing to the identity) and possibly emits
//! post-measurement states `ρ_k`. This crate computes how close the device is
//! to the ideal, averaged over Haar-random pure inputs:
//!
//! * exact average measurement fidelity `F̄ = ∫ (Σ_k √(p_k r_k))² dψ`, with
//!   `p_k = ⟨ψ|Π_k|ψ⟩` and `r_k = ⟨ψ|E_k|ψ⟩`, by Bloch-sphere quadrature
//!   (d = 2) or Monte Carlo over Haar samples (any d) — [`metrics`], [`haar`];
//! * the closed-form lower bound `lb = (1 + d·X̄)/(1 + d)` with
//!   `X̄ = (Σ_l √u_l)²/d²`, `u_l = tr(Π_l E_l)`, and its output-state
//!   variant built from repeat probabilities `Q_k = tr(ρ_k E_k)` — [`metrics`];
//! * sampling protocols that estimate those bounds from measurement outcomes
//!   alone, with Chebyshev/Hoeffding trial counts and Laplace-smoothed
//!   frequency estimates — [`protocols`], driven by the simulated device in
//!   [`simdevice`];
//! * full measurement tomography as the cost baseline the protocols are
//!   meant to undercut — [`tomography`];
//! * the single-qubit validity analysis of the bound (integrand gap,
//!   negative-gap regions, measure and penalty bounds, sufficient condition,
//!   and the fidelity/bound sweeps) — [`qubit`].
//!
//! Everything is deterministic under a fixed seed: Monte Carlo and shot
//! sampling use counter-keyed sub-streams so results are independent of
//! thread count, and identical with the `parallel` feature on or off.

#![forbid(unsafe_code)]
// Indexed loops mirror the (r, c) matrix algebra they implement.
#![allow(clippy::needless_range_loop)]

pub mod exec;
pub mod haar;
pub mod linalg;
pub mod metrics;
pub mod protocols;
pub mod quantum;
pub mod qubit;
pub mod simdevice;
pub mod tomography;

pub use exec::ExecMode;
pub use haar::{BlochQuadrature, HaarSampler};
pub use linalg::ComplexMatrix;
pub use metrics::{BoundInputs, FidelityResult, Integrator};
pub use protocols::EstimationConfig;
pub use quantum::{DensityMatrix, Povm, PureState, Rank1Pvm, Tolerances};
pub use simdevice::{DeviceSpec, NoisyDevice};
pub use tomography::TomographyPlan;


use thiserror::Error;

/// Default tolerance for positive semidefiniteness: eigenvalues down to
/// `-TOL_PSD` count as nonnegative.
pub const TOL_PSD: f64 = 1e-10;
/// Default tolerance for Hermiticity, in max-norm of `A - A†`.
pub const TOL_HERM: f64 = 1e-10;
/// Default tolerance for POVM completeness, in max-norm of `Σ E_k - 𝟙`.
pub const TOL_COMPLETE: f64 = 1e-9;

/// Everything that can go wrong across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },
    #[error("effect {index} is not positive semidefinite (min eigenvalue {min_eig:.3e})")]
    NotPsd { index: usize, min_eig: f64 },
    #[error("effects do not sum to the identity (max residual {residual:.3e})")]
    NotComplete { residual: f64 },
    #[error("matrix is not Hermitian (residual {residual:.3e})")]
    NotHermitian { residual: f64 },
    #[error("state vector is not normalized (norm {norm})")]
    NotNormalized { norm: f64 },
    #[error("basis is not orthonormal (Gram residual {residual:.3e})")]
    NotOrthonormal { residual: f64 },
    #[error("matrix trace is {trace}, expected 1")]
    NotUnitTrace { trace: f64 },
    #[error("{what} = {value} is out of range")]
    OutOfRange { what: &'static str, value: f64 },
    #[error("outcome distribution invalid (residual {residual:.3e})")]
    BadDistribution { residual: f64 },
    #[error("device has no output states configured")]
    NoOutputStates,
    #[error("needed {needed} conditioned samples, got {got}")]
    InsufficientConditionedSamples { needed: usize, got: usize },
    #[error("zero trials with no smoothing")]
    ZeroTrials,
    #[error("integrand failed at sample {sample}: {message}")]
    Integrand { sample: usize, message: String },
    #[error("quadrature did not stabilize: change {achieved:.3e} > tolerance {tolerance:.3e}")]
    NonConvergent { achieved: f64, tolerance: f64 },
    #[error("completeness projection failed: residual {post:.3e} after, {pre:.3e} before")]
    ProjectionFailed { pre: f64, post: f64 },
    #[error("numerical failure: {what}")]
    NumericalFailure { what: String },
}

pub type Result<T> = std::result::Result<T, Error>;
