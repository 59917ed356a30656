//! `mfid`: average measurement fidelity from the command line.
//!
//! Every run prints a human summary plus a `config echo:` line holding the
//! effective settings; feeding that JSON back via `--config` reproduces the
//! run. With `--out`, the structured result (JSON document, or CSV for
//! `sweep`) is written atomically. Failures print one JSON object on
//! standard error and exit 1 (validation), 2 (I/O, schema, usage), or
//! 3 (numerical).

mod args;
mod commands;
mod error;
mod models;
mod output;

use clap::error::ErrorKind;
use clap::Parser;
use serde_json::{json, Value};

use args::{Cli, CommandKind, ConfigFile, Settings};
use commands::FileBody;
use error::{CliError, CliResult};

fn main() {
    std::process::exit(run());
}

fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return 0;
        }
        Err(e) => {
            eprint!("{e}");
            let first_line = e.to_string().lines().next().unwrap_or("bad invocation").to_string();
            let err = CliError::usage(first_line.trim_start_matches("error: ").to_string());
            eprintln!("{}", err.to_json());
            return err.exit_code();
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error[{}]: {}", err.kind(), err.message());
            eprintln!("{}", err.to_json());
            err.exit_code()
        }
    }
}

fn execute(cli: Cli) -> CliResult<()> {
    let file_cfg = match &cli.opts.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            serde_json::from_str::<ConfigFile>(&text).map_err(|e| CliError::schema(path, e))?
        }
        None => ConfigFile::default(),
    };
    let out = Settings::resolve_out(&cli.opts, &file_cfg);
    let settings = Settings::merge(&cli.opts, file_cfg, cli.command);
    if let Some(n) = settings.threads {
        // Best effort: a cap set after the pool starts is silently ignored.
        let _ = mfid::exec::set_global_threads(n);
    }

    let result = commands::run(cli.command, &settings)?;
    print!("{}", result.human);
    println!(
        "config echo: {}",
        serde_json::to_string(&settings).expect("settings serialize")
    );

    if let Some(path) = out {
        let body = match result.file {
            FileBody::Csv(csv) => csv,
            FileBody::Json(payload) => output::render_document(
                document_payload(cli.command, &settings, payload),
                settings.threads,
            ),
        };
        output::write_atomic(&path, &body)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

/// Payload = command name + config echo + the command's own fields, so the
/// written document identifies and reproduces itself.
fn document_payload(command: CommandKind, settings: &Settings, body: Value) -> Value {
    let mut map = serde_json::Map::new();
    map.insert("command".into(), json!(command.name()));
    map.insert(
        "config_echo".into(),
        serde_json::to_value(settings).expect("settings serialize"),
    );
    match body {
        Value::Object(extra) => map.extend(extra),
        other => {
            map.insert("result".into(), other);
        }
    }
    Value::Object(map)
}
