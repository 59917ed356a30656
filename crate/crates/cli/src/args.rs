//! Command-line arguments, the JSON config file that can stand in for
//! them, and the merged settings a run actually uses. Explicit flags win
//! over config-file values; the effective settings are echoed into every
//! JSON payload so a run can be reproduced from its own output.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Parser)]
#[command(
    name = "mfid",
    version,
    about = "Average measurement fidelity: exact values, certified bounds, \
             sampling protocols, and tomography baselines for noisy quantum \
             measurements"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: CommandKind,
    #[command(flatten)]
    pub opts: Opts,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand)]
pub enum CommandKind {
    /// Check model files (POVM, device, PVM) for schema and physical validity
    Validate,
    /// Exact average measurement fidelity of a noisy model
    Fidelity,
    /// Closed-form lower bound from overlaps (and repeat probabilities)
    Bound,
    /// Run the overlap-sampling protocol on a simulated device
    Protocol,
    /// Run the output-state protocol (needs a device with output states)
    ProtocolStates,
    /// Reconstruct a device's POVM by measurement tomography
    Tomography,
    /// Sweep the coherent qubit family: exact fidelity vs bound, CSV rows
    Sweep,
    /// Scan the family grid for lower-bound violations
    Scan,
    /// Trial-count formulas for the protocols
    Trials,
}

impl CommandKind {
    pub fn name(&self) -> &'static str {
        match self {
            CommandKind::Validate => "validate",
            CommandKind::Fidelity => "fidelity",
            CommandKind::Bound => "bound",
            CommandKind::Protocol => "protocol",
            CommandKind::ProtocolStates => "protocol-states",
            CommandKind::Tomography => "tomography",
            CommandKind::Sweep => "sweep",
            CommandKind::Scan => "scan",
            CommandKind::Trials => "trials",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IntegratorKind {
    /// Bloch-sphere product quadrature (qubit models only)
    Quad,
    /// Haar Monte Carlo (any dimension)
    Mc,
}

/// One flat option bag shared by every subcommand; commands read the
/// fields they need and ignore the rest.
#[derive(Args, Debug, Default)]
pub struct Opts {
    /// JSON file supplying any of the options below; explicit flags win
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// POVM model file
    #[arg(long, global = true, value_name = "PATH")]
    pub povm: Option<PathBuf>,
    /// Device model file (POVM, optional output states, sampling seed)
    #[arg(long, global = true, value_name = "PATH")]
    pub device: Option<PathBuf>,
    /// Reference measurement file (orthonormal basis); default computational
    #[arg(long, global = true, value_name = "PATH")]
    pub pvm: Option<PathBuf>,
    /// Comma-separated overlaps u_k
    #[arg(long, global = true, value_delimiter = ',', value_name = "LIST")]
    pub u: Option<Vec<f64>>,
    /// Comma-separated repeat probabilities q_k
    #[arg(long, global = true, value_delimiter = ',', value_name = "LIST")]
    pub q: Option<Vec<f64>>,
    /// Target estimation accuracy
    #[arg(long, global = true, value_name = "F")]
    pub epsilon: Option<f64>,
    /// Allowed failure probability
    #[arg(long, global = true, value_name = "F")]
    pub delta: Option<f64>,
    /// Laplace smoothing weight
    #[arg(long, global = true, value_name = "F")]
    pub lambda: Option<f64>,
    /// Protocol / Monte Carlo seed
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// A-priori overlap scale used to size trial counts
    #[arg(long, global = true, value_name = "F")]
    pub u_guess: Option<f64>,
    /// Integration backend for exact fidelities
    #[arg(long, global = true, value_enum, value_name = "quad|mc")]
    pub integrator: Option<IntegratorKind>,
    /// Monte Carlo sample count
    #[arg(long, global = true, value_name = "N")]
    pub mc_samples: Option<usize>,
    /// Worker thread cap for parallel kernels
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,
    /// Output path for the structured JSON/CSV result
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Enumerate all ordered index pairs instead of sampling them
    #[arg(long, global = true)]
    pub exhaustive_pairs: bool,
    /// Read probabilities exactly off the model instead of sampling shots
    #[arg(long, global = true)]
    pub exact: bool,
    /// Tomography shots per probe state (omit for exact-probability mode)
    #[arg(long, global = true, value_name = "N")]
    pub shots_per_state: Option<u64>,
    /// Comma-separated u0 values for the family sweep
    #[arg(long, global = true, value_delimiter = ',', value_name = "LIST")]
    pub u0: Option<Vec<f64>>,
    /// Number of coherence points per sweep/scan curve
    #[arg(long, global = true, value_name = "N")]
    pub gamma_points: Option<usize>,
    /// Scan at the fine-grained grid (multi-hour runtime) instead of desk scale
    #[arg(long, global = true)]
    pub full_resolution: bool,
}

/// The config-file schema: same vocabulary as the flags.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub povm: Option<PathBuf>,
    pub device: Option<PathBuf>,
    pub pvm: Option<PathBuf>,
    pub u: Option<Vec<f64>>,
    pub q: Option<Vec<f64>>,
    pub epsilon: Option<f64>,
    pub delta: Option<f64>,
    pub lambda: Option<f64>,
    pub seed: Option<u64>,
    pub u_guess: Option<f64>,
    pub integrator: Option<IntegratorKind>,
    pub mc_samples: Option<usize>,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    pub exhaustive_pairs: Option<bool>,
    pub exact: Option<bool>,
    pub shots_per_state: Option<u64>,
    pub u0: Option<Vec<f64>>,
    pub gamma_points: Option<usize>,
    pub full_resolution: Option<bool>,
}

/// Flags merged over the config file: what the run actually uses. Also the
/// payload's config echo, hence fully serializable; feeding it back via
/// `--config` reproduces the run.
#[derive(Debug, Serialize)]
pub struct Settings {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub povm: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub device: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pvm: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<Vec<f64>>,
    pub epsilon: f64,
    pub delta: f64,
    pub lambda: f64,
    pub seed: u64,
    pub u_guess: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub integrator: Option<IntegratorKind>,
    pub mc_samples: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    pub exhaustive_pairs: bool,
    pub exact: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shots_per_state: Option<u64>,
    pub u0: Vec<f64>,
    pub gamma_points: usize,
    pub full_resolution: bool,
}

impl Settings {
    pub fn merge(opts: &Opts, file: ConfigFile, command: CommandKind) -> Self {
        let default_gamma_points = match command {
            CommandKind::Scan => 20,
            _ => 50,
        };
        Settings {
            povm: opts.povm.clone().or(file.povm),
            device: opts.device.clone().or(file.device),
            pvm: opts.pvm.clone().or(file.pvm),
            u: opts.u.clone().or(file.u),
            q: opts.q.clone().or(file.q),
            epsilon: opts.epsilon.or(file.epsilon).unwrap_or(0.01),
            delta: opts.delta.or(file.delta).unwrap_or(0.05),
            lambda: opts.lambda.or(file.lambda).unwrap_or(1.0),
            seed: opts.seed.or(file.seed).unwrap_or(0),
            u_guess: opts.u_guess.or(file.u_guess).unwrap_or(0.99),
            integrator: opts.integrator.or(file.integrator),
            mc_samples: opts.mc_samples.or(file.mc_samples).unwrap_or(1_000_000),
            threads: opts.threads.or(file.threads),
            exhaustive_pairs: opts.exhaustive_pairs || file.exhaustive_pairs.unwrap_or(false),
            exact: opts.exact || file.exact.unwrap_or(false),
            shots_per_state: opts.shots_per_state.or(file.shots_per_state),
            u0: opts.u0.clone().or(file.u0).unwrap_or_else(|| vec![0.99, 0.995, 0.999]),
            gamma_points: opts.gamma_points.or(file.gamma_points).unwrap_or(default_gamma_points),
            full_resolution: opts.full_resolution || file.full_resolution.unwrap_or(false),
        }
    }

    /// The output path resolves outside `Settings` so the echo stays free
    /// of machine-local result paths.
    pub fn resolve_out(opts: &Opts, file: &ConfigFile) -> Option<PathBuf> {
        opts.out.clone().or_else(|| file.out.clone())
    }

    pub fn require_device(&self) -> CliResult<&PathBuf> {
        self.device
            .as_ref()
            .ok_or_else(|| CliError::usage("this command needs --device <PATH>"))
    }
}
