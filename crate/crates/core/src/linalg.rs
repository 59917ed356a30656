//! Dense complex matrices at small dimension.
//!
//! [`ComplexMatrix`] is a square matrix of `Complex<f64>` backed by
//! `nalgebra`, with the predicates and decompositions the rest of the crate
//! needs (Hermiticity checks, Hermitian eigendecomposition, PSD square
//! roots, Kronecker products). JSON form: a row-major array of rows, each
//! entry a two-element `[re, im]` array; floats round-trip bit-exactly.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::{Error, Result, TOL_HERM};

/// A square matrix of complex amplitudes.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix {
    m: DMatrix<Complex64>,
}

/// Eigendecomposition of a Hermitian matrix: `A = V diag(values) V†`,
/// eigenvalues ascending, eigenvectors in the matching columns of `vectors`.
#[derive(Clone, Debug)]
pub struct Eigh {
    pub values: Vec<f64>,
    pub vectors: ComplexMatrix,
}

impl ComplexMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self { m: DMatrix::zeros(dim, dim) }
    }

    pub fn identity(dim: usize) -> Self {
        Self { m: DMatrix::identity(dim, dim) }
    }

    pub fn from_fn(dim: usize, f: impl FnMut(usize, usize) -> Complex64) -> Self {
        Self { m: DMatrix::from_fn(dim, dim, f) }
    }

    /// Builds from row-major nested data; rejects non-square or non-finite input.
    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let dim = rows.len();
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimMismatch { expected: dim, found: row.len() });
            }
            for z in row {
                if !z.re.is_finite() || !z.im.is_finite() {
                    return Err(Error::NumericalFailure { what: "non-finite matrix entry".into() });
                }
            }
        }
        Ok(Self::from_fn(dim, |r, c| rows[r][c]))
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.m[(r, c)]
    }

    pub fn set(&mut self, r: usize, c: usize, v: Complex64) {
        self.m[(r, c)] = v;
    }

    pub fn add(&self, other: &Self) -> Self {
        Self { m: &self.m + &other.m }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self { m: &self.m - &other.m }
    }

    pub fn matmul(&self, other: &Self) -> Self {
        Self { m: &self.m * &other.m }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { m: &self.m * Complex64::new(s, 0.0) }
    }

    pub fn scale_c(&self, s: Complex64) -> Self {
        Self { m: &self.m * s }
    }

    pub fn adjoint(&self) -> Self {
        Self { m: self.m.adjoint() }
    }

    pub fn trace(&self) -> Complex64 {
        self.m.trace()
    }

    /// Entrywise max modulus.
    pub fn max_abs(&self) -> f64 {
        self.m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
    }

    /// `‖A − A†‖_max`.
    pub fn herm_residual(&self) -> f64 {
        self.sub(&self.adjoint()).max_abs()
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.herm_residual() <= tol
    }

    /// `(A + A†)/2`, removing benign asymmetry noise.
    pub fn hermitize(&self) -> Self {
        self.add(&self.adjoint()).scale(0.5)
    }

    /// `tr(A·B)`.
    pub fn trace_product(&self, other: &Self) -> Complex64 {
        let d = self.dim();
        let mut acc = Complex64::new(0.0, 0.0);
        for r in 0..d {
            for c in 0..d {
                acc += self.get(r, c) * other.get(c, r);
            }
        }
        acc
    }

    /// `⟨ψ|A|ψ⟩` for a raw amplitude vector.
    pub fn expectation(&self, psi: &[Complex64]) -> Complex64 {
        let d = self.dim();
        let mut acc = Complex64::new(0.0, 0.0);
        for r in 0..d {
            let mut row = Complex64::new(0.0, 0.0);
            for c in 0..d {
                row += self.get(r, c) * psi[c];
            }
            acc += psi[r].conj() * row;
        }
        acc
    }

    /// Hermitian eigendecomposition. The matrix must be Hermitian within
    /// `tol_herm`; it is explicitly Hermitized first so the solver never sees
    /// asymmetry noise.
    pub fn eigh(&self) -> Result<Eigh> {
        let residual = self.herm_residual();
        if residual > TOL_HERM {
            return Err(Error::NotHermitian { residual });
        }
        let herm = self.hermitize();
        let eig = nalgebra::SymmetricEigen::try_new(herm.m, 1e-14, 10_000).ok_or_else(|| {
            Error::NumericalFailure { what: "Hermitian eigensolver did not converge".into() }
        })?;
        let d = eig.eigenvalues.len();
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vectors = ComplexMatrix::from_fn(d, |r, c| eig.eigenvectors[(r, order[c])]);
        Ok(Eigh { values, vectors })
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(self.eigh()?.values[0])
    }

    /// Square root of a PSD matrix; eigenvalues below zero (rounding noise on
    /// validated inputs) are clamped to zero.
    pub fn sqrt_psd(&self) -> Result<Self> {
        let eig = self.eigh()?;
        Ok(eig.rebuild(|v| v.max(0.0).sqrt()))
    }

    /// `A^{-1/2}` for a positive-definite matrix; fails with the smallest
    /// eigenvalue if any eigenvalue is at or below `floor`.
    pub fn inv_sqrt_pd(&self, floor: f64) -> Result<Self> {
        let eig = self.eigh()?;
        if eig.values[0] <= floor {
            return Err(Error::NotPsd { index: 0, min_eig: eig.values[0] });
        }
        Ok(eig.rebuild(|v| 1.0 / v.sqrt()))
    }

    /// Kronecker product (dims multiply).
    pub fn kron(&self, other: &Self) -> Self {
        Self { m: self.m.kronecker(&other.m) }
    }
}

impl Eigh {
    /// `V diag(f(values)) V†`.
    pub fn rebuild(&self, f: impl Fn(f64) -> f64) -> ComplexMatrix {
        let d = self.values.len();
        let v = &self.vectors;
        let fv: Vec<f64> = self.values.iter().map(|&x| f(x)).collect();
        ComplexMatrix::from_fn(d, |r, c| {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..d {
                acc += v.get(r, k) * fv[k] * v.get(c, k).conj();
            }
            acc
        })
    }
}

/// The swap operator on a d×d ⊗ d×d space: `SWAP |i⟩⊗|j⟩ = |j⟩⊗|i⟩`.
pub fn swap_matrix(d: usize) -> ComplexMatrix {
    let mut s = ComplexMatrix::zeros(d * d);
    for i in 0..d {
        for j in 0..d {
            s.set(i * d + j, j * d + i, Complex64::new(1.0, 0.0));
        }
    }
    s
}

impl Serialize for ComplexMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let d = self.dim();
        let rows: Vec<Vec<[f64; 2]>> = (0..d)
            .map(|r| (0..d).map(|c| [self.get(r, c).re, self.get(r, c).im]).collect())
            .collect();
        rows.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ComplexMatrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<[f64; 2]>>::deserialize(deserializer)?;
        let rows: Vec<Vec<Complex64>> = rows
            .into_iter()
            .map(|row| row.into_iter().map(|[re, im]| Complex64::new(re, im)).collect())
            .collect();
        ComplexMatrix::from_rows(&rows).map_err(D::Error::custom)
    }
}
