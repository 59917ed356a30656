//! Haar-uniform pure-state sampling, Monte Carlo integration over states,
//! and Bloch-sphere quadrature for d = 2.
//!
//! Sampling is reproducible: identical `(seed, stream_id, dim)` produce the
//! identical sequence, and [`mc_integrate`] fans out over per-chunk
//! sub-streams so its result is independent of thread count and execution
//! mode. The quadrature pairs Gauss-Legendre nodes in cos θ with a uniform
//! (trapezoid-on-periodic) grid in φ, integrating against the uniform
//! sphere density `sin θ / 4π`; one node-count doubling supplies the error
//! estimate.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::exec::{map_chunks, ExecMode};
use crate::linalg::{swap_matrix, ComplexMatrix};
use crate::quantum::PureState;
use crate::{Error, Result};

/// Samples per sub-stream chunk in chunked integration.
const CHUNK: usize = 4096;

/// A seeded source of Haar-uniform pure states.
///
/// Sub-streams are keyed as `(stream_id << 32) + chunk + 1`, so keep
/// `stream_id` below 2³² and chunk counts below 2³² − 1.
#[derive(Clone, Debug)]
pub struct HaarSampler {
    dim: usize,
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl HaarSampler {
    pub fn new(dim: usize, seed: u64) -> Self {
        Self::with_stream(dim, seed, 0)
    }

    pub fn with_stream(dim: usize, seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self { dim, seed, stream_id, rng }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// The sampler for chunk `chunk` of this sampler's stream family.
    pub fn substream(&self, chunk: u64) -> Self {
        Self::with_stream(self.dim, self.seed, (self.stream_id << 32) + chunk + 1)
    }

    /// One Haar-uniform pure state: a normalized vector of i.i.d. standard
    /// complex Gaussians.
    pub fn sample_pure(&mut self) -> PureState {
        loop {
            let amps: Vec<Complex64> = (0..self.dim)
                .map(|_| {
                    Complex64::new(self.rng.sample(StandardNormal), self.rng.sample(StandardNormal))
                })
                .collect();
            if let Ok(state) = PureState::normalized(amps) {
                return state;
            }
        }
    }
}

/// Projector onto the symmetric subspace of two d-level systems:
/// `(𝟙⊗𝟙 + SWAP)/2`, with trace `d(d+1)/2`.
pub fn sym_projector(d: usize) -> ComplexMatrix {
    ComplexMatrix::identity(d * d).add(&swap_matrix(d)).scale(0.5)
}

/// A Monte Carlo estimate with its standard error (sample std / √n).
#[derive(Clone, Copy, Debug)]
pub struct McEstimate {
    pub mean: f64,
    pub std_err: f64,
}

/// Monte Carlo mean of `f` over Haar-uniform pure states, with standard
/// error. Deterministic under a fixed sampler; the default execution mode.
pub fn mc_integrate(
    f: impl Fn(&PureState) -> Result<f64> + Sync + Send,
    s: &HaarSampler,
    n: usize,
) -> Result<McEstimate> {
    mc_integrate_in(f, s, n, ExecMode::default())
}

/// [`mc_integrate`] with an explicit execution mode; both modes return
/// bitwise-identical results.
pub fn mc_integrate_in(
    f: impl Fn(&PureState) -> Result<f64> + Sync + Send,
    s: &HaarSampler,
    n: usize,
    mode: ExecMode,
) -> Result<McEstimate> {
    if n < 2 {
        return Err(Error::OutOfRange { what: "sample count", value: n as f64 });
    }
    let n_chunks = n.div_ceil(CHUNK);
    let partials = map_chunks(n_chunks, mode, |ci| -> Result<(f64, f64)> {
        let mut sampler = s.substream(ci as u64);
        let lo = ci * CHUNK;
        let hi = n.min(lo + CHUNK);
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for i in lo..hi {
            let psi = sampler.sample_pure();
            let v = f(&psi)
                .map_err(|e| Error::Integrand { sample: i, message: e.to_string() })?;
            sum += v;
            sum_sq += v * v;
        }
        Ok((sum, sum_sq))
    });
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for p in partials {
        let (s1, s2) = p?;
        sum += s1;
        sum_sq += s2;
    }
    let nf = n as f64;
    let mean = sum / nf;
    let var = ((sum_sq - sum * sum / nf) / (nf - 1.0)).max(0.0);
    Ok(McEstimate { mean, std_err: (var / nf).sqrt() })
}

/// Entrywise Monte Carlo mean of `|ψ⟩⟨ψ| ⊗ |ψ⟩⟨ψ|` with per-entry standard
/// errors, the numerical side of the symmetric-subspace identity
/// `∫ |ψ⟩⟨ψ|^⊗2 dψ = Π_sym / tr(Π_sym)`.
pub fn second_moment_mc(
    s: &HaarSampler,
    n: usize,
    mode: ExecMode,
) -> Result<(ComplexMatrix, Vec<Vec<f64>>)> {
    if n < 2 {
        return Err(Error::OutOfRange { what: "sample count", value: n as f64 });
    }
    let d = s.dim();
    let dd = d * d;
    let n_chunks = n.div_ceil(CHUNK);
    let partials = map_chunks(n_chunks, mode, |ci| {
        let mut sampler = s.substream(ci as u64);
        let lo = ci * CHUNK;
        let hi = n.min(lo + CHUNK);
        let mut sum = vec![Complex64::new(0.0, 0.0); dd * dd];
        let mut sum_sq = vec![0.0f64; dd * dd];
        for _ in lo..hi {
            let psi = sampler.sample_pure();
            let a = psi.amplitudes();
            for r in 0..dd {
                let (r1, r2) = (r / d, r % d);
                for c in 0..dd {
                    let (c1, c2) = (c / d, c % d);
                    let v = a[r1] * a[c1].conj() * a[r2] * a[c2].conj();
                    sum[r * dd + c] += v;
                    sum_sq[r * dd + c] += v.norm_sqr();
                }
            }
        }
        (sum, sum_sq)
    });
    let mut sum = vec![Complex64::new(0.0, 0.0); dd * dd];
    let mut sum_sq = vec![0.0f64; dd * dd];
    for (s1, s2) in partials {
        for i in 0..dd * dd {
            sum[i] += s1[i];
            sum_sq[i] += s2[i];
        }
    }
    let nf = n as f64;
    let mean = ComplexMatrix::from_fn(dd, |r, c| sum[r * dd + c] / nf);
    let std_err = (0..dd)
        .map(|r| {
            (0..dd)
                .map(|c| {
                    let m = sum[r * dd + c] / nf;
                    let var = ((sum_sq[r * dd + c] / nf - m.norm_sqr()) * nf / (nf - 1.0)).max(0.0);
                    (var / nf).sqrt()
                })
                .collect()
        })
        .collect();
    Ok((mean, std_err))
}

/// Gauss-Legendre nodes and weights on [-1, 1] (weights sum to 2).
pub(crate) fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Legendre recurrence for P_n(x) and P'_n(x).
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Quadrature over the Bloch sphere against the density `sin θ / 4π`:
/// Gauss-Legendre in cos θ × uniform grid in φ, with refinement doublings
/// for the error estimate and (optionally) a convergence requirement.
#[derive(Clone, Copy, Debug)]
pub struct BlochQuadrature {
    pub n_theta: usize,
    pub n_phi: usize,
    /// Total refinement levels evaluated beyond the base grid (≥ 1; the
    /// first doubling always runs to supply the error estimate).
    pub max_levels: usize,
    /// When set, refinement must bring successive changes below this value,
    /// else [`Error::NonConvergent`].
    pub tolerance: Option<f64>,
}

impl Default for BlochQuadrature {
    fn default() -> Self {
        Self { n_theta: 256, n_phi: 256, max_levels: 1, tolerance: None }
    }
}

impl BlochQuadrature {
    pub fn new(n_theta: usize, n_phi: usize) -> Self {
        Self { n_theta, n_phi, ..Self::default() }
    }

    pub fn with_tolerance(mut self, tolerance: f64, max_levels: usize) -> Self {
        self.tolerance = Some(tolerance);
        self.max_levels = max_levels.max(1);
        self
    }
}

/// A quadrature value with the node-doubling error estimate.
#[derive(Clone, Copy, Debug)]
pub struct BlochEstimate {
    pub value: f64,
    pub error_estimate: f64,
}

/// The pure state at Bloch angles (θ, φ): `cos(θ/2)|0⟩ + e^{iφ} sin(θ/2)|1⟩`.
pub fn bloch_state(theta: f64, phi: f64) -> PureState {
    let (half_sin, half_cos) = (theta / 2.0).sin_cos();
    PureState::new(vec![
        Complex64::new(half_cos, 0.0),
        Complex64::new(phi.cos() * half_sin, phi.sin() * half_sin),
    ])
    .expect("Bloch angles give a unit vector")
}

fn quad_level(f: &(impl Fn(f64, f64) -> f64 + Sync), q: &BlochQuadrature, level: u32, mode: ExecMode) -> f64 {
    let n_t = q.n_theta << level;
    let n_p = q.n_phi << level;
    let (xs, ws) = gauss_legendre(n_t);
    let phis: Vec<f64> = (0..n_p).map(|j| std::f64::consts::TAU * j as f64 / n_p as f64).collect();
    let rows = map_chunks(n_t, mode, |i| {
        let theta = xs[i].acos();
        let mut acc = 0.0;
        for &phi in &phis {
            acc += f(theta, phi);
        }
        acc * ws[i]
    });
    // Fixed-order reduction keeps the result mode-independent.
    rows.iter().sum::<f64>() / (2.0 * n_p as f64)
}

/// Integrates `f(θ, φ)` against the uniform sphere measure, with the default
/// execution mode.
pub fn bloch_integrate(
    f: impl Fn(f64, f64) -> f64 + Sync,
    q: &BlochQuadrature,
) -> Result<BlochEstimate> {
    bloch_integrate_in(f, q, ExecMode::default())
}

/// [`bloch_integrate`] with an explicit execution mode.
pub fn bloch_integrate_in(
    f: impl Fn(f64, f64) -> f64 + Sync,
    q: &BlochQuadrature,
    mode: ExecMode,
) -> Result<BlochEstimate> {
    let mut prev = quad_level(&f, q, 0, mode);
    let mut value = quad_level(&f, q, 1, mode);
    let mut change = (value - prev).abs();
    if let Some(tol) = q.tolerance {
        let mut level = 1;
        while change > tol && level < q.max_levels as u32 {
            level += 1;
            prev = value;
            value = quad_level(&f, q, level, mode);
            change = (value - prev).abs();
        }
        if change > tol {
            return Err(Error::NonConvergent { achieved: change, tolerance: tol });
        }
    }
    if !value.is_finite() {
        return Err(Error::NumericalFailure { what: "quadrature produced non-finite value".into() });
    }
    Ok(BlochEstimate { value, error_estimate: change })
}
