//! `dicesgd` command-line interface.
//!
//! Results go to stdout as JSON. Failures print a JSON error object to
//! stderr and exit with 2 (configuration or i/o), 3 (calibration), or 4
//! (numerical failure).

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use dicesgd::oracle::{build_counterexample, clipped_fixed_point};
use dicesgd_harness::experiment::{output_dir, run_and_write, sweep_and_write};
use dicesgd_harness::{compare_runs, ExperimentConfig, HarnessError, Result, RunTrace};

#[derive(Parser)]
#[command(
    name = "dicesgd",
    version,
    about = "Differentially private clipped SGD experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every seed of a config and write CSV traces with JSON sidecars.
    Run {
        config: PathBuf,
        /// Overrides the config's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the calibrated noise for a config with a budget.
    Calibrate { config: PathBuf },
    /// Run the effective-stepsize sweep of a config.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Locate the clipped fixed points of the counterexample built for `C`.
    FixedPoint {
        #[arg(long = "C", value_name = "C")]
        c: f64,
    },
    /// Compare two persisted traces.
    Compare { a: PathBuf, b: PathBuf },
}

/// Writes `value` as pretty JSON. A closed stdout (for example a pipe into
/// `head`) is not an error.
fn print(value: &impl serde::Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(HarnessError::Io {
            path: "<stdout>".into(),
            source: e,
        }),
        _ => Ok(()),
    }
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let dir = out.unwrap_or_else(|| output_dir(&cfg));
            let runs = run_and_write(&cfg, &dir)?;
            let summary: Vec<_> = runs
                .iter()
                .map(|(t, files)| {
                    json!({
                        "seed": t.metadata.seed,
                        "csv": files.csv,
                        "sidecar": files.sidecar,
                        "sigma1": t.metadata.sigma1,
                        "final_loss": t.metadata.final_loss,
                        "final_grad_norm": t.metadata.final_grad_norm,
                        "state_checksum": t.metadata.state_checksum,
                    })
                })
                .collect();
            print(&summary)
        }
        Command::Calibrate { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let Some(budget) = cfg.budget else {
                return Err(HarnessError::Config(
                    "config has no budget to calibrate against".into(),
                ));
            };
            let problem = cfg.problem.build()?;
            let inputs = cfg.calibration_inputs(problem.as_ref());
            let cal = dicesgd::accountant::calibrate(cfg.algorithm, &inputs, &budget)
                .map_err(|e| HarnessError::Calibration(e.to_string()))?;
            print(&json!({
                "algorithm": cal.algorithm,
                "sigma1": cal.sigma1,
                "alpha_star": cal.alpha_star,
                "epsilon_check": cal.epsilon_check,
                "inputs": {
                    "epsilon": budget.epsilon,
                    "delta": budget.delta,
                    "calibration": inputs,
                },
                "g_tilde": cal.g_tilde,
                "violations": cal.violations,
                "note": cal.note,
            }))
        }
        Command::Sweep { config, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let dir = out.unwrap_or_else(|| output_dir(&cfg));
            let (cells, path) = sweep_and_write(&cfg, &dir)?;
            let failed = cells.iter().filter(|c| c.error.is_some()).count();
            print(&json!({ "csv": path, "cells": cells.len(), "failed": failed }))
        }
        Command::FixedPoint { c } => {
            let problem = build_counterexample(c)?;
            print(&clipped_fixed_point(&problem, c)?)
        }
        Command::Compare { a, b } => {
            let ta = RunTrace::load(&a)?;
            let tb = RunTrace::load(&b)?;
            print(&compare_runs(&ta, &tb)?)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!(
                "{}",
                json!({ "error": err.kind(), "code": err.exit_code(), "message": err.to_string() })
            );
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
