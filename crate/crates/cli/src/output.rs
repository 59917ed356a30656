//! Structured output: the payload/metadata JSON document, the sweep CSV,
//! and atomic file writes. Timestamps and host facts live only in the
//! metadata block, so payload bytes are a stable function of the inputs
//! and seed.

use std::io::Write;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::Value;

use mfid::qubit::SweepRow;

use crate::error::{CliError, CliResult};

#[derive(Serialize)]
struct Metadata {
    unix_time: u64,
    version: &'static str,
    os: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    threads: Option<usize>,
}

#[derive(Serialize)]
struct Document {
    payload: Value,
    metadata: Metadata,
}

/// Wraps a payload with the quarantined metadata block and renders the
/// full document.
pub fn render_document(payload: Value, threads: Option<usize>) -> String {
    let metadata = Metadata {
        unix_time: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        version: env!("CARGO_PKG_VERSION"),
        os: std::env::consts::OS,
        threads,
    };
    serde_json::to_string_pretty(&Document { payload, metadata })
        .expect("document serialization cannot fail")
}

/// Writes via a temporary file in the destination directory plus an atomic
/// rename, so a failed run never leaves a partial output file.
pub fn write_atomic(path: &Path, contents: &str) -> CliResult<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(path, e))?;
    tmp.write_all(contents.as_bytes()).map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

/// Twelve significant digits in scientific notation.
pub fn fmt_g12(x: f64) -> String {
    format!("{x:.11e}")
}

/// The sweep CSV: fixed column set, one header row, twelve significant
/// digits per value.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("u0,gamma_abs,F_exact,lb,ub,gap\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            fmt_g12(r.u0),
            fmt_g12(r.gamma_abs),
            fmt_g12(r.f_exact),
            fmt_g12(r.lb),
            fmt_g12(r.ub),
            fmt_g12(r.gap)
        ));
    }
    out
}
