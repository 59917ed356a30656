//! Model-file loading with two-stage error classification: JSON syntax or
//! shape problems are schema errors (exit 2), while well-formed files
//! describing unphysical objects are validation failures (exit 1). The
//! library's own deserializers validate during parsing, so this module
//! parses a raw structural mirror first and validates explicitly.

use std::path::Path;

use num_complex::Complex64;
use serde::Deserialize;

use mfid::linalg::ComplexMatrix;
use mfid::quantum::{validate_povm, DensityMatrix, Povm, PureState, Rank1Pvm};
use mfid::simdevice::NoisyDevice;
use mfid::Error;

use crate::error::{CliError, CliResult};

#[derive(Deserialize)]
struct RawPovm {
    dim: usize,
    effects: Vec<ComplexMatrix>,
}

#[derive(Deserialize)]
struct RawDevice {
    povm: RawPovm,
    #[serde(default)]
    output_states: Option<Vec<ComplexMatrix>>,
    seed: u64,
}

#[derive(Deserialize)]
struct RawPvm {
    dim: usize,
    basis: Vec<Vec<[f64; 2]>>,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::schema(path, e))
}

fn build_povm(raw: RawPovm) -> CliResult<Povm> {
    for e in &raw.effects {
        if e.dim() != raw.dim {
            return Err(CliError::Validation(Error::DimMismatch {
                expected: raw.dim,
                found: e.dim(),
            }));
        }
    }
    validate_povm(raw.effects).map_err(CliError::from)
}

pub fn load_povm(path: &Path) -> CliResult<Povm> {
    build_povm(read_json(path)?)
}

pub fn load_device(path: &Path) -> CliResult<NoisyDevice> {
    let raw: RawDevice = read_json(path)?;
    let povm = build_povm(raw.povm)?;
    match raw.output_states {
        None => Ok(NoisyDevice::new(povm, raw.seed)),
        Some(mats) => {
            let states = mats
                .into_iter()
                .map(DensityMatrix::new)
                .collect::<mfid::Result<Vec<_>>>()
                .map_err(CliError::from)?;
            NoisyDevice::with_output_states(povm, states, raw.seed).map_err(CliError::from)
        }
    }
}

pub fn load_pvm(path: &Path) -> CliResult<Rank1Pvm> {
    let raw: RawPvm = read_json(path)?;
    if raw.basis.len() != raw.dim {
        return Err(CliError::Validation(Error::DimMismatch {
            expected: raw.dim,
            found: raw.basis.len(),
        }));
    }
    let basis = raw
        .basis
        .into_iter()
        .map(|amps| {
            PureState::new(amps.into_iter().map(|[re, im]| Complex64::new(re, im)).collect())
        })
        .collect::<mfid::Result<Vec<_>>>()
        .map_err(CliError::from)?;
    Rank1Pvm::new(basis).map_err(CliError::from)
}
