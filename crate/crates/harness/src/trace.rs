//! Run traces, their metadata, and persistence as CSV plus a JSON sidecar.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use dicesgd::optim::convergence_threshold_check;
use dicesgd::{Algorithm, OptimizerState, StepReport};

use crate::config::{sha256_hex, CalibrationRecord, ExperimentConfig};
use crate::error::{HarnessError, Result};

/// Column order of the persisted trace.
pub const CSV_HEADER: [&str; 7] = [
    "t",
    "loss",
    "grad_norm",
    "alpha_e",
    "e_norm",
    "clip_fraction",
    "realized_batch",
];

/// Everything about a run except the per-iteration rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub problem_hash: String,
    pub seed: u64,
    pub algorithm: Algorithm,
    pub problem: String,
    pub n: usize,
    pub d: usize,
    pub horizon: usize,
    pub batch: usize,
    pub sigma1: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration: Option<CalibrationRecord>,
    /// `C2 >= 3 C1 + sigma / B` with `sigma` the problem's deviation hint
    /// (zero when absent). Recorded, never enforced.
    pub threshold_check: bool,
    /// `C2 >= C1`.
    pub privacy_consistent: bool,
    /// The last iterate weight is the empty product and therefore zero.
    pub last_weight_is_empty_product: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub guarantee_note: Option<String>,
    pub final_loss: f64,
    pub final_grad_norm: f64,
    /// SHA-256 over the little-endian bytes of `x`, `e`, `m1`, `m2`, `t`.
    pub state_checksum: String,
}

impl RunMetadata {
    pub(crate) fn threshold_flag(config: &ExperimentConfig, deviation_hint: Option<f64>) -> bool {
        convergence_threshold_check(
            &config.clip,
            deviation_hint.unwrap_or(0.0),
            config.sampling.nominal_batch(),
        )
    }
}

/// A finished run: rows, final state, and metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub metadata: RunMetadata,
    pub reports: Vec<StepReport>,
    pub final_state: OptimizerState,
}

/// JSON sidecar written next to the CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Sidecar {
    metadata: RunMetadata,
    final_state: OptimizerState,
}

pub fn state_checksum(state: &OptimizerState) -> String {
    let mut bytes = Vec::new();
    for v in [&state.x, &state.e, &state.m1, &state.m2] {
        for x in v.as_slice() {
            bytes.extend_from_slice(&x.to_le_bytes());
        }
    }
    bytes.extend_from_slice(&(state.t as u64).to_le_bytes());
    sha256_hex(&bytes)
}

/// Serializes reports as CSV. Reals use the shortest representation that
/// parses back to the same value.
pub fn reports_to_csv(reports: &[StepReport]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| HarnessError::Config(format!("csv encoding: {e}"));
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for r in reports {
        w.write_record([
            r.t.to_string(),
            r.loss.to_string(),
            r.grad_norm.to_string(),
            r.alpha_e.to_string(),
            r.e_norm.to_string(),
            r.clip_fraction.to_string(),
            r.realized_batch.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.into_inner()
        .map_err(|e| HarnessError::Config(format!("csv encoding: {e}")))
}

pub fn reports_from_csv<R: std::io::Read>(reader: R) -> Result<Vec<StepReport>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| HarnessError::Config(format!("trace header: {e}")))?;
    if header.iter().ne(CSV_HEADER) {
        return Err(HarnessError::Config(format!(
            "unexpected trace header {:?}",
            header.iter().collect::<Vec<_>>()
        )));
    }
    let mut out = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| HarnessError::Config(format!("trace row {row}: {e}")))?;
        let real = |j: usize| -> Result<f64> {
            rec[j].parse().map_err(|_| {
                HarnessError::Config(format!("trace row {row}: bad {}", CSV_HEADER[j]))
            })
        };
        let count = |j: usize| -> Result<usize> {
            rec[j].parse().map_err(|_| {
                HarnessError::Config(format!("trace row {row}: bad {}", CSV_HEADER[j]))
            })
        };
        out.push(StepReport {
            t: count(0)?,
            loss: real(1)?,
            grad_norm: real(2)?,
            alpha_e: real(3)?,
            e_norm: real(4)?,
            clip_fraction: real(5)?,
            realized_batch: count(6)?,
        });
    }
    Ok(out)
}

/// Writes `bytes` to `path` through a temporary file in the same directory
/// followed by a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| HarnessError::io(dir, e))?;
    tmp.write_all(bytes)
        .map_err(|e| HarnessError::io(path, e))?;
    tmp.as_file()
        .sync_all()
        .map_err(|e| HarnessError::io(path, e))?;
    tmp.persist(path)
        .map_err(|e| HarnessError::io(path, e.error))?;
    Ok(())
}

/// Paths of a persisted trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceFiles {
    pub csv: PathBuf,
    pub sidecar: PathBuf,
}

pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

impl RunTrace {
    pub fn len(&self) -> usize {
        self.reports.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reports.is_empty()
    }

    pub fn alpha_e(&self) -> Vec<f64> {
        self.reports.iter().map(|r| r.alpha_e).collect()
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        reports_to_csv(&self.reports)
    }

    /// Writes `<dir>/<stem>.csv` and `<dir>/<stem>.json`.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<TraceFiles> {
        let csv = dir.join(format!("{stem}.csv"));
        let sidecar = sidecar_path(&csv);
        write_atomic(&csv, &self.to_csv()?)?;
        let side = Sidecar {
            metadata: self.metadata.clone(),
            final_state: self.final_state.clone(),
        };
        write_atomic(&sidecar, serde_json::to_string_pretty(&side)?.as_bytes())?;
        Ok(TraceFiles { csv, sidecar })
    }

    /// Loads a trace from its CSV and the sidecar next to it.
    pub fn load(csv: &Path) -> Result<Self> {
        let file = std::fs::File::open(csv).map_err(|e| HarnessError::io(csv, e))?;
        let reports = reports_from_csv(std::io::BufReader::new(file))?;
        let side_path = sidecar_path(csv);
        let text =
            std::fs::read_to_string(&side_path).map_err(|e| HarnessError::io(&side_path, e))?;
        let side: Sidecar = serde_json::from_str(&text)?;
        if reports.len() != side.metadata.horizon {
            return Err(HarnessError::Config(format!(
                "{} has {} rows but the sidecar records T = {}",
                csv.display(),
                reports.len(),
                side.metadata.horizon
            )));
        }
        Ok(RunTrace {
            metadata: side.metadata,
            reports,
            final_state: side.final_state,
        })
    }
}
