//! One function per subcommand. Each returns the human summary for
//! standard output plus, for runs with `--out`, the structured file body
//! (JSON payload or sweep CSV).

use std::fmt::Write as _;
use std::path::Path;

use serde_json::{json, Value};

use mfid::haar::BlochQuadrature;
use mfid::metrics::{
    avg_error, avg_fidelity_probs, avg_fidelity_states, exact_overlaps, exact_repeat_probs,
    lower_bound_probs, lower_bound_states, BoundInputs, Integrator,
};
use mfid::protocols::{chebyshev_trials, hoeffding_pairs, run_protocol_probs, run_protocol_states, EstimationConfig};
use mfid::quantum::Rank1Pvm;
use mfid::qubit::{desk_scan_grid, sweep_gap_table, uniform_fractions, violation_scan};
use mfid::simdevice::NoisyDevice;
use mfid::tomography::{cost_model, reconstruct, TomographyPlan};

use crate::args::{CommandKind, IntegratorKind, Settings};
use crate::error::{CliError, CliResult};
use crate::models;
use crate::output::sweep_csv;

/// What a command produced: text for the terminal and, optionally, the
/// body of the `--out` file.
pub struct RunOutput {
    pub human: String,
    pub file: FileBody,
}

pub enum FileBody {
    Json(Value),
    Csv(String),
}

pub fn run(command: CommandKind, settings: &Settings) -> CliResult<RunOutput> {
    match command {
        CommandKind::Validate => validate(settings),
        CommandKind::Fidelity => fidelity(settings),
        CommandKind::Bound => bound(settings),
        CommandKind::Protocol => protocol(settings, false),
        CommandKind::ProtocolStates => protocol(settings, true),
        CommandKind::Tomography => tomography(settings),
        CommandKind::Sweep => sweep(settings),
        CommandKind::Scan => scan(settings),
        CommandKind::Trials => trials(settings),
    }
}

/// The noisy model plus the reference measurement it is compared against.
/// A bare POVM becomes a device with the configured seed.
fn load_model(settings: &Settings) -> CliResult<(NoisyDevice, Rank1Pvm)> {
    let device = match (&settings.device, &settings.povm) {
        (Some(path), None) => models::load_device(path)?,
        (None, Some(path)) => NoisyDevice::new(models::load_povm(path)?, settings.seed),
        (Some(_), Some(_)) => {
            return Err(CliError::usage("give either --povm or --device, not both"));
        }
        (None, None) => return Err(CliError::usage("this command needs --povm or --device")),
    };
    let pvm = match &settings.pvm {
        Some(path) => models::load_pvm(path)?,
        None => Rank1Pvm::computational(device.dim()),
    };
    Ok((device, pvm))
}

fn integrator_for(settings: &Settings, dim: usize) -> Integrator {
    match settings.integrator {
        None => Integrator::default_for(dim, settings.seed),
        Some(IntegratorKind::Quad) => Integrator::Quadrature(BlochQuadrature::default()),
        Some(IntegratorKind::Mc) => {
            Integrator::MonteCarlo { seed: settings.seed, samples: settings.mc_samples }
        }
    }
}

fn estimation_config(settings: &Settings) -> EstimationConfig {
    let mut cfg = EstimationConfig::new(settings.epsilon, settings.delta, settings.seed);
    cfg.lambda = settings.lambda;
    cfg.u_guess = settings.u_guess;
    cfg.exhaustive_pairs = settings.exhaustive_pairs;
    cfg.exact_probabilities = settings.exact;
    cfg
}

fn validate(settings: &Settings) -> CliResult<RunOutput> {
    let mut human = String::new();
    let mut files = Vec::new();

    let mut record = |path: &Path, kind: &str, summary: String, extra: Value| {
        let _ = writeln!(human, "{kind} {}: OK ({summary})", path.display());
        let mut entry = json!({ "path": path.display().to_string(), "kind": kind });
        if let (Value::Object(map), Value::Object(extra)) = (&mut entry, extra) {
            map.extend(extra);
        }
        files.push(entry);
    };

    if let Some(path) = &settings.povm {
        let povm = models::load_povm(path)?;
        let diag = povm.diagnostics();
        record(
            path,
            "povm",
            format!(
                "dim {}, {} effects, min eigenvalue {:.1e}, completeness residual {:.1e}",
                povm.dim(),
                povm.n_effects(),
                diag.worst_min_eig,
                diag.completeness_residual
            ),
            json!({
                "dim": povm.dim(),
                "n_effects": povm.n_effects(),
                "worst_min_eig": diag.worst_min_eig,
                "completeness_residual": diag.completeness_residual,
            }),
        );
    }
    if let Some(path) = &settings.device {
        let dev = models::load_device(path)?;
        let n_states = dev.output_states().map_or(0, |s| s.len());
        record(
            path,
            "device",
            format!(
                "dim {}, {} effects, {} output states, seed {}",
                dev.dim(),
                dev.povm().n_effects(),
                n_states,
                dev.seed()
            ),
            json!({
                "dim": dev.dim(),
                "n_effects": dev.povm().n_effects(),
                "output_states": n_states,
                "seed": dev.seed(),
            }),
        );
    }
    if let Some(path) = &settings.pvm {
        let pvm = models::load_pvm(path)?;
        record(
            path,
            "pvm",
            format!("dim {}, orthonormal basis of {}", pvm.dim(), pvm.dim()),
            json!({ "dim": pvm.dim() }),
        );
    }

    if files.is_empty() {
        return Err(CliError::usage("validate needs at least one of --povm, --device, --pvm"));
    }
    Ok(RunOutput { human, file: FileBody::Json(json!({ "files": files })) })
}

fn fidelity(settings: &Settings) -> CliResult<RunOutput> {
    let (dev, pvm) = load_model(settings)?;
    let integrator = integrator_for(settings, dev.dim());
    let f = avg_fidelity_probs(&pvm, dev.povm(), &integrator)?;
    let err = avg_error(&f);

    let mut human = format!("dim {}, {} effects\n", dev.dim(), dev.povm().n_effects());
    let _ = writeln!(
        human,
        "average fidelity F = {:.6} ± {:.1e} [{:?}]",
        f.value, f.std_err, f.method
    );
    let _ = writeln!(human, "average error 1 - F = {:.6}", err.value);

    let mut payload = json!({
        "dim": dev.dim(),
        "fidelity_probs": f,
        "error_probs": err,
    });
    if dev.output_states().is_some() {
        let fs = avg_fidelity_states(&pvm, &dev, &integrator)?;
        let _ = writeln!(
            human,
            "output-state ensemble fidelity = {:.6} ± {:.1e} [{:?}]",
            fs.value, fs.std_err, fs.method
        );
        payload["fidelity_states"] = serde_json::to_value(fs).expect("serializable");
    }
    Ok(RunOutput { human, file: FileBody::Json(payload) })
}

fn bound(settings: &Settings) -> CliResult<RunOutput> {
    let (u, q) = match &settings.u {
        Some(u) => (u.clone(), settings.q.clone()),
        None => {
            let (dev, pvm) = load_model(settings)?;
            let u = exact_overlaps(&pvm, dev.povm())?;
            let q = match dev.output_states() {
                Some(_) => Some(exact_repeat_probs(&pvm, &dev)?),
                None => settings.q.clone(),
            };
            (u, q)
        }
    };

    let lb = lower_bound_probs(&BoundInputs::probs(u.clone()))?;
    let mut human = format!("lb = {:.4}  ub = {:.4}\n", lb, 1.0 - lb);
    let mut payload = json!({
        "dim": u.len(),
        "u": u.clone(),
        "lb": lb,
        "ub": 1.0 - lb,
    });
    if let Some(q) = q {
        let lbs = lower_bound_states(&BoundInputs::with_states(u, q.clone()))?;
        let _ = writeln!(human, "output-state bound: lb = {:.4}  ub = {:.4}", lbs, 1.0 - lbs);
        payload["q"] = serde_json::to_value(q).expect("serializable");
        payload["lb_states"] = json!(lbs);
        payload["ub_states"] = json!(1.0 - lbs);
    }
    Ok(RunOutput { human, file: FileBody::Json(payload) })
}

fn protocol(settings: &Settings, states: bool) -> CliResult<RunOutput> {
    let path = settings.require_device()?;
    let dev = models::load_device(path)?;
    let pvm = match &settings.pvm {
        Some(p) => models::load_pvm(p)?,
        None => Rank1Pvm::computational(dev.dim()),
    };
    let cfg = estimation_config(settings);
    let report = if states {
        run_protocol_states(&dev, &pvm, &cfg)?
    } else {
        run_protocol_probs(&dev, &pvm, &cfg)?
    };

    let mut human = format!(
        "estimated lb = {:.4}  (ub = {:.4})\n",
        report.lb_hat,
        1.0 - report.lb_hat
    );
    let a = &report.accounting;
    let _ = write!(human, "per-index trials N1 = {}", a.n1);
    if let Some(n2) = a.n2 {
        let _ = write!(human, "; conditioned repeats N2 = {n2}");
    }
    if let Some(m2) = a.m2 {
        let _ = write!(human, "; worst preparation rounds M2 = {m2}");
    }
    if let Some(k) = a.k_pairs {
        let _ = write!(human, "; sampled pairs K = {k}");
    } else if !report.pairs.is_empty() {
        let _ = write!(human, "; ordered pairs enumerated = {}", report.pairs.len());
    }
    let _ = writeln!(human, "; total device shots = {}", report.total_shots);

    let payload = json!({ "report": report });
    Ok(RunOutput { human, file: FileBody::Json(payload) })
}

fn tomography(settings: &Settings) -> CliResult<RunOutput> {
    let path = settings.require_device()?;
    let mut dev = models::load_device(path)?;
    let d = dev.dim();
    let plan = match settings.shots_per_state {
        Some(n) => TomographyPlan::sampled(d, n),
        None => TomographyPlan::exact(d),
    };
    let reference = dev.povm().clone();
    let rec = reconstruct(&mut dev, &plan)?;
    let entry_error = rec.max_entry_error(&reference)?;
    let cost = cost_model(d, settings.shots_per_state.unwrap_or(0));

    let mut human = format!(
        "dim {d}: probed {} states for {} probabilities, reconstructed {} effects\n",
        cost.states,
        cost.probabilities,
        reference.n_effects()
    );
    let _ = match settings.shots_per_state {
        Some(n) => writeln!(human, "mode: sampled, {n} shots per state ({} total)", cost.total_shots),
        None => writeln!(human, "mode: exact probabilities, 0 shots"),
    };
    let diag = &rec.diagnostics;
    let _ = writeln!(human, "max entry error vs source model = {entry_error:.2e}");
    let _ = writeln!(
        human,
        "completeness residual {:.1e} -> {:.1e} ({:?} repair), worst raw eigenvalue {:.1e}",
        diag.pre_completeness, diag.post_completeness, diag.repair, diag.worst_raw_eig
    );

    let payload = json!({
        "plan": plan,
        "cost": cost,
        "max_entry_error": entry_error,
        "reconstruction": rec,
    });
    Ok(RunOutput { human, file: FileBody::Json(payload) })
}

fn sweep(settings: &Settings) -> CliResult<RunOutput> {
    let quad = BlochQuadrature::default();
    let rows = sweep_gap_table(&quad, &settings.u0, settings.gamma_points)?;

    let mut human = String::new();
    for chunk in rows.chunks(settings.gamma_points) {
        let first = &chunk[0];
        let max_gap = chunk.iter().fold(f64::MIN, |m, r| m.max(r.gap));
        let min_gap = chunk.iter().fold(f64::MAX, |m, r| m.min(r.gap));
        let _ = writeln!(
            human,
            "u0 = {:.4}: lb = {:.4}  ub = {:.4}  gap {:.1e} .. {:.1e} over {} coherence points",
            first.u0,
            first.lb,
            first.ub,
            max_gap,
            min_gap,
            chunk.len()
        );
    }
    Ok(RunOutput { human, file: FileBody::Csv(sweep_csv(&rows)) })
}

fn scan(settings: &Settings) -> CliResult<RunOutput> {
    let grid = if settings.full_resolution {
        // 0.5 to 0.9999 in steps of 1e-4; hours of quadrature at desk defaults.
        (0..5000).map(|i| 0.5 + 1e-4 * i as f64).collect()
    } else {
        desk_scan_grid()
    };
    let quad = BlochQuadrature::default();
    let report = violation_scan(&grid, &uniform_fractions(settings.gamma_points), &quad)?;

    let mut human = format!(
        "scanned {} grid points ({} u0 values x {} coherence points)\n",
        report.rows_scanned,
        grid.len(),
        settings.gamma_points
    );
    let _ = writeln!(
        human,
        "violations: {}; worst margin lb - F = {:.2e}",
        report.violations.len(),
        report.max_negative_gap
    );
    for v in &report.violations {
        let _ = writeln!(
            human,
            "  VIOLATION at u0 = {}, |gamma| = {}: F = {}, lb = {}",
            v.u0, v.gamma_abs, v.f_exact, v.lb
        );
    }
    let payload = json!({ "report": report });
    Ok(RunOutput { human, file: FileBody::Json(payload) })
}

fn trials(settings: &Settings) -> CliResult<RunOutput> {
    let u = settings.u.as_ref().and_then(|u| u.first().copied()).unwrap_or(settings.u_guess);
    let n = chebyshev_trials(settings.epsilon, settings.delta, u)?;
    let k = hoeffding_pairs(settings.epsilon, settings.delta, (0.0, 1.0))?;
    let human = format!(
        "per-index trials (variance bound at u = {u}): N = {n}\nsampled pairs (range [0, 1]): K = {k}\n"
    );
    let payload = json!({
        "epsilon": settings.epsilon,
        "delta": settings.delta,
        "u": u,
        "chebyshev_trials": n,
        "hoeffding_pairs": k,
        "pair_range": [0.0, 1.0],
    });
    Ok(RunOutput { human, file: FileBody::Json(payload) })
}
