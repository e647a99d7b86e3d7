//! Batch scenario runner for the localindex spectral laboratory.
//!
//! Scenarios are JSON files (or named builtins); reports are deterministic
//! JSON documents plus optional CSV tables. Exit status is nonzero iff any
//! acceptance check in the report failed.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use localindex::scenario::{builtin, list_builtins, run_scenario, validate, Scenario};

#[derive(Parser)]
#[command(name = "localindex", about = "localized-residue and index-theorem scenario runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file or a named builtin
    Run {
        /// path to a scenario JSON file, or a builtin name
        scenario: String,
        /// override the truncation
        #[arg(long)]
        truncation: Option<i64>,
        /// override the asymptotic depth
        #[arg(long)]
        depth: Option<i64>,
        /// write the JSON report here (default: stdout, or
        /// $LOCALINDEX_OUT_DIR/<name>.json when the env var is set)
        #[arg(long)]
        out: Option<PathBuf>,
        /// write per-entry CSV tables into this directory
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// List the built-in scenarios
    List,
    /// Validate a scenario file without running it
    Validate {
        /// path to a scenario JSON file
        path: PathBuf,
    },
}

fn load_scenario(spec: &str) -> Result<Scenario, String> {
    if list_builtins().contains(&spec) {
        return builtin(spec).map_err(|e| e.to_string());
    }
    let text = std::fs::read_to_string(spec)
        .map_err(|e| format!("cannot read scenario '{spec}': {e}"))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| format!("invalid JSON in '{spec}': {e}"))?;
    validate(&value).map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::List => {
            for name in list_builtins() {
                println!("{name}");
            }
            ExitCode::SUCCESS
        }
        Command::Validate { path } => {
            let spec = path.to_string_lossy().to_string();
            match load_scenario(&spec) {
                Ok(sc) => {
                    println!("ok: scenario '{}' ({:?})", sc.name, sc.kind);
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("invalid: {e}");
                    ExitCode::FAILURE
                }
            }
        }
        Command::Run { scenario, truncation, depth, out, csv } => {
            let sc = match load_scenario(&scenario) {
                Ok(sc) => sc.with_overrides(truncation, depth),
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::FAILURE;
                }
            };
            let started = std::time::Instant::now();
            let report = match run_scenario(&sc) {
                Ok(r) => r,
                Err(e) => {
                    eprintln!("scenario '{}' failed: {e}", sc.name);
                    return ExitCode::FAILURE;
                }
            };
            eprintln!(
                "scenario '{}': {} checks, {} in {:.1}s",
                report.scenario,
                report.entries.len(),
                if report.pass { "all passed" } else { "FAILURES" },
                started.elapsed().as_secs_f64()
            );
            let json = report.to_json_string();
            let out_path = out.or_else(|| {
                std::env::var_os("LOCALINDEX_OUT_DIR").map(|dir| {
                    PathBuf::from(dir).join(format!("{}.json", report.scenario))
                })
            });
            match out_path {
                Some(path) => {
                    if let Some(parent) = path.parent() {
                        let _ = std::fs::create_dir_all(parent);
                    }
                    if let Err(e) = std::fs::write(&path, &json) {
                        eprintln!("cannot write report {}: {e}", path.display());
                        return ExitCode::FAILURE;
                    }
                    eprintln!("report written to {}", path.display());
                }
                None => println!("{json}"),
            }
            if let Some(dir) = csv {
                let _ = std::fs::create_dir_all(&dir);
                let path = dir.join(format!("{}.csv", report.scenario));
                if let Err(e) = std::fs::write(&path, report.to_csv()) {
                    eprintln!("cannot write csv {}: {e}", path.display());
                    return ExitCode::FAILURE;
                }
            }
            if report.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
