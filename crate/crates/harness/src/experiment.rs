//! Running configs, sweeping thresholds, and comparing traces.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use dicesgd::optim::{run, RunSeeds, StepSize};
use dicesgd::{Algorithm, ClipConfig};

use crate::config::{ExperimentConfig, Resolved};
use crate::error::{HarnessError, Result};
use crate::trace::{state_checksum, write_atomic, RunMetadata, RunTrace, TraceFiles};
use crate::weights::{weighted_grad_summary, WeightedSummary};

/// Runs `resolved` once with `seed` driving both random streams.
pub fn run_resolved(config: &ExperimentConfig, resolved: &Resolved, seed: u64) -> Result<RunTrace> {
    let problem = resolved.problem.as_ref();
    let trace = run(
        config.algorithm,
        problem,
        &resolved.hp,
        config.sampling,
        RunSeeds::from_seed(seed),
        resolved.x0.clone(),
    )?;
    let final_x = &trace.final_state.x;
    let final_loss = problem.loss(final_x)?;
    let final_grad_norm = problem.full_gradient(final_x)?.norm();
    let hints = problem.hints();
    let guarantee_note = resolved
        .calibration
        .as_ref()
        .and_then(|c| c.result.note.clone());
    let metadata = RunMetadata {
        config: config.clone(),
        config_hash: config.hash(),
        problem_hash: config.problem_hash(),
        seed,
        algorithm: config.algorithm,
        problem: problem.describe(),
        n: problem.len(),
        d: problem.dim(),
        horizon: resolved.hp.horizon,
        batch: config.sampling.nominal_batch(),
        sigma1: resolved.hp.sigma1,
        calibration: resolved.calibration.clone(),
        threshold_check: RunMetadata::threshold_flag(config, hints.variance),
        privacy_consistent: config.clip.privacy_consistent(),
        last_weight_is_empty_product: !trace.is_empty(),
        guarantee_note,
        final_loss,
        final_grad_norm,
        state_checksum: state_checksum(&trace.final_state),
    };
    Ok(RunTrace {
        metadata,
        reports: trace.reports,
        final_state: trace.final_state,
    })
}

/// A run for every seed of `config`, in seed order.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<RunTrace>> {
    let resolved = config.resolve()?;
    config
        .seeds
        .iter()
        .map(|&seed| run_resolved(config, &resolved, seed))
        .collect()
}

/// Runs every seed and writes `<dir>/<name>_seed<k>.{csv,json}`.
pub fn run_and_write(config: &ExperimentConfig, dir: &Path) -> Result<Vec<(RunTrace, TraceFiles)>> {
    run_experiment(config)?
        .into_iter()
        .map(|trace| {
            let stem = format!("{}_seed{}", config.name, trace.metadata.seed);
            let files = trace.write(dir, &stem)?;
            Ok((trace, files))
        })
        .collect()
}

/// Output directory of a config, `.` when unset.
pub fn output_dir(config: &ExperimentConfig) -> PathBuf {
    config
        .output_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from("."))
}

/// One `(C1, m, r, seed)` cell of an effective-stepsize sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub c1: f64,
    pub c2: f64,
    pub multiplier: f64,
    pub eta: f64,
    pub seed: u64,
    pub sigma1: Option<f64>,
    pub final_loss: Option<f64>,
    pub final_grad_norm: Option<f64>,
    pub error: Option<String>,
}

/// The config of one sweep cell: peak step size `m / C1` with the schedule
/// shape of `base`, and `C2 = r C1`.
pub fn sweep_cell_config(
    base: &ExperimentConfig,
    c1: f64,
    multiplier: f64,
    ratio: f64,
) -> Result<ExperimentConfig> {
    let eta = multiplier / c1;
    let peak = base.step_size.peak();
    let step_size = if peak > 0.0 {
        base.step_size.scaled(eta / peak)
    } else {
        StepSize::Constant { eta }
    };
    let mut cfg = base.clone();
    cfg.clip = ClipConfig::new(c1, ratio * c1)?;
    cfg.step_size = step_size;
    cfg.use_convergence_stepsize = false;
    cfg.sweep = None;
    cfg.name = format!("{}_c1_{c1}_m_{multiplier}_r_{ratio}", base.name);
    Ok(cfg)
}

/// Runs every grid cell for every seed. A failing cell is recorded with its
/// error and the sweep moves on.
pub fn effective_stepsize_sweep(config: &ExperimentConfig) -> Result<Vec<SweepCell>> {
    let Some(spec) = &config.sweep else {
        return Err(HarnessError::Config("config has no sweep section".into()));
    };
    config.validate()?;
    let mut cells = Vec::new();
    for &c1 in &spec.c1_grid {
        for &m in &spec.multiplier_grid {
            for &r in &spec.c2_ratio_grid {
                let eta = m / c1;
                let blank = |seed: u64, error: String| SweepCell {
                    c1,
                    c2: r * c1,
                    multiplier: m,
                    eta,
                    seed,
                    sigma1: None,
                    final_loss: None,
                    final_grad_norm: None,
                    error: Some(error),
                };
                let resolved = sweep_cell_config(config, c1, m, r).and_then(|cfg| {
                    let res = cfg.resolve()?;
                    Ok((cfg, res))
                });
                let (cfg, res) = match resolved {
                    Ok(v) => v,
                    Err(e) => {
                        cells.extend(config.seeds.iter().map(|&s| blank(s, e.to_string())));
                        continue;
                    }
                };
                for &seed in &config.seeds {
                    cells.push(match run_resolved(&cfg, &res, seed) {
                        Ok(trace) => SweepCell {
                            c1,
                            c2: r * c1,
                            multiplier: m,
                            eta,
                            seed,
                            sigma1: Some(trace.metadata.sigma1),
                            final_loss: Some(trace.metadata.final_loss),
                            final_grad_norm: Some(trace.metadata.final_grad_norm),
                            error: None,
                        },
                        Err(e) => blank(seed, e.to_string()),
                    });
                }
            }
        }
    }
    Ok(cells)
}

pub fn sweep_to_csv(cells: &[SweepCell]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| HarnessError::Config(format!("csv encoding: {e}"));
    w.write_record([
        "c1",
        "c2",
        "multiplier",
        "eta",
        "seed",
        "sigma1",
        "final_loss",
        "final_grad_norm",
        "error",
    ])
    .map_err(csv_err)?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for c in cells {
        w.write_record([
            c.c1.to_string(),
            c.c2.to_string(),
            c.multiplier.to_string(),
            c.eta.to_string(),
            c.seed.to_string(),
            opt(c.sigma1),
            opt(c.final_loss),
            opt(c.final_grad_norm),
            c.error.clone().unwrap_or_default(),
        ])
        .map_err(csv_err)?;
    }
    w.into_inner()
        .map_err(|e| HarnessError::Config(format!("csv encoding: {e}")))
}

/// Runs the sweep and writes `<dir>/<name>_sweep.csv`.
pub fn sweep_and_write(config: &ExperimentConfig, dir: &Path) -> Result<(Vec<SweepCell>, PathBuf)> {
    let cells = effective_stepsize_sweep(config)?;
    let path = dir.join(format!("{}_sweep.csv", config.name));
    write_atomic(&path, &sweep_to_csv(&cells)?)?;
    Ok((cells, path))
}

/// One side of a comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSide {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub final_loss: f64,
    pub final_grad_norm: f64,
    pub final_x_norm: f64,
    /// `None` when every weight is zero.
    pub weighted: Option<WeightedSummary>,
}

impl RunSide {
    fn of(trace: &RunTrace) -> Self {
        RunSide {
            algorithm: trace.metadata.algorithm,
            seed: trace.metadata.seed,
            final_loss: trace.metadata.final_loss,
            final_grad_norm: trace.metadata.final_grad_norm,
            final_x_norm: trace.final_state.x.norm(),
            weighted: weighted_grad_summary(trace).ok(),
        }
    }
}

/// Side-by-side summary of two runs on the same problem and horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub problem: String,
    pub horizon: usize,
    pub a: RunSide,
    pub b: RunSide,
    /// `a.final_loss - b.final_loss`.
    pub final_loss_gap: f64,
    /// `a.final_grad_norm - b.final_grad_norm`.
    pub final_grad_gap: f64,
    /// `| ||x_a|| - ||x_b|| |`, the gap in distance from the origin.
    pub bias_gap: f64,
    /// `||x_a - x_b||`.
    pub final_x_distance: f64,
}

pub fn compare_runs(a: &RunTrace, b: &RunTrace) -> Result<Comparison> {
    if a.metadata.problem_hash != b.metadata.problem_hash {
        return Err(HarnessError::Config(format!(
            "traces are on different problems: {} vs {}",
            a.metadata.problem, b.metadata.problem
        )));
    }
    if a.metadata.horizon != b.metadata.horizon {
        return Err(HarnessError::Config(format!(
            "traces have different horizons: {} vs {}",
            a.metadata.horizon, b.metadata.horizon
        )));
    }
    let sa = RunSide::of(a);
    let sb = RunSide::of(b);
    Ok(Comparison {
        problem: a.metadata.problem.clone(),
        horizon: a.metadata.horizon,
        final_loss_gap: sa.final_loss - sb.final_loss,
        final_grad_gap: sa.final_grad_norm - sb.final_grad_norm,
        bias_gap: (sa.final_x_norm - sb.final_x_norm).abs(),
        final_x_distance: a.final_state.x.distance(&b.final_state.x)?,
        a: sa,
        b: sb,
    })
}
