//! Error classification and the machine-readable error object.
//!
//! Exit codes: 0 success, 1 model-validation failure, 2 I/O or schema
//! error (bad files, bad JSON, bad invocation), 3 numerical failure. Every
//! failure also emits a one-line JSON object on standard error.

use std::path::Path;

use serde::Serialize;

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug)]
pub enum CliError {
    /// A model failed physical validation, or inputs were out of range.
    Validation(mfid::Error),
    /// Quadrature, projection, or integrand breakdown.
    Numerical(mfid::Error),
    Io { path: String, source: std::io::Error },
    Schema { path: String, source: serde_json::Error },
    Usage(String),
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError::Usage(message.into())
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.display().to_string(), source }
    }

    pub fn schema(path: &Path, source: serde_json::Error) -> Self {
        CliError::Schema { path: path.display().to_string(), source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Io { .. } | CliError::Schema { .. } | CliError::Usage(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Validation(_) => "validation",
            CliError::Io { .. } => "io",
            CliError::Schema { .. } => "schema",
            CliError::Usage(_) => "usage",
            CliError::Numerical(_) => "numerical",
        }
    }

    pub fn message(&self) -> String {
        match self {
            CliError::Validation(e) | CliError::Numerical(e) => e.to_string(),
            CliError::Io { path, source } => format!("{path}: {source}"),
            CliError::Schema { path, source } => format!("{path}: {source}"),
            CliError::Usage(m) => m.clone(),
        }
    }

    /// The stderr object: `{"error": {"kind", "message", "exit_code"}}`.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Inner<'a> {
            kind: &'a str,
            message: String,
            exit_code: i32,
        }
        #[derive(Serialize)]
        struct Outer<'a> {
            error: Inner<'a>,
        }
        let outer = Outer {
            error: Inner {
                kind: self.kind(),
                message: self.message(),
                exit_code: self.exit_code(),
            },
        };
        serde_json::to_string(&outer).unwrap_or_else(|_| {
            r#"{"error":{"kind":"io","message":"error serialization failed","exit_code":2}}"#
                .to_string()
        })
    }
}

impl From<mfid::Error> for CliError {
    fn from(e: mfid::Error) -> Self {
        match e {
            mfid::Error::Integrand { .. }
            | mfid::Error::NonConvergent { .. }
            | mfid::Error::ProjectionFailed { .. }
            | mfid::Error::NumericalFailure { .. } => CliError::Numerical(e),
            _ => CliError::Validation(e),
        }
    }
}
