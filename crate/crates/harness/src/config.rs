//! Experiment configuration and its resolution into runnable settings.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use dicesgd::accountant::{self, Calibration, CalibrationInputs, ConstraintMode, PrivacyBudget};
use dicesgd::optim::{convergence_stepsize, AdamParams, StepSize};
use dicesgd::oracle::build_counterexample;
use dicesgd::{
    Algorithm, ClipConfig, FiniteSum, HyperParams, Logistic, Quadratic, SamplingMode, Vector,
};

use crate::error::{HarnessError, Result};

/// Which objective to train on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProblemSpec {
    /// One-dimensional problem on which clipped SGD is biased.
    Counterexample { c: f64 },
    Quadratic {
        dim: usize,
        n: usize,
        condition: f64,
        #[serde(default = "default_spread")]
        spread: f64,
        #[serde(default)]
        center: f64,
        #[serde(default)]
        seed: u64,
    },
    /// Rows of `label,feature_1,...,feature_d`.
    LogisticCsv { path: PathBuf },
    /// Two Gaussian classes at `+-separation`.
    LogisticSynthetic {
        dim: usize,
        n: usize,
        separation: f64,
        #[serde(default)]
        seed: u64,
    },
}

fn default_spread() -> f64 {
    1.0
}

impl ProblemSpec {
    pub fn build(&self) -> Result<Box<dyn FiniteSum>> {
        Ok(match self {
            ProblemSpec::Counterexample { c } => Box::new(build_counterexample(*c)?),
            ProblemSpec::Quadratic {
                dim,
                n,
                condition,
                spread,
                center,
                seed,
            } => Box::new(Quadratic::synthetic(
                *dim, *n, *condition, *spread, *center, *seed,
            )?),
            ProblemSpec::LogisticCsv { path } => Box::new(Logistic::from_csv(path)?),
            ProblemSpec::LogisticSynthetic {
                dim,
                n,
                separation,
                seed,
            } => Box::new(Logistic::two_gaussians(*dim, *n, *separation, *seed)?),
        })
    }
}

/// Where the accountant takes `G'` from.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GPrimeSource {
    /// `max{0, G + sigma - C1}` from the problem hints, `+inf` if missing.
    Hints,
    #[default]
    Infinite,
    Value(f64),
}

/// Accountant settings used when a budget is present.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CalibrationOptions {
    /// Single threshold `C`. Defaults to `C1` for DPSGD-GC, `1` for the
    /// automatic method, and `C2 * B` otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default)]
    pub g_prime: GPrimeSource,
    #[serde(default)]
    pub constraints: ConstraintMode,
}

/// Starting point `x0`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialPoint {
    #[default]
    Zeros,
    Filled {
        value: f64,
    },
    Values {
        values: Vec<f64>,
    },
}

impl InitialPoint {
    pub fn build(&self, dim: usize) -> Result<Vector> {
        match self {
            InitialPoint::Zeros => Ok(Vector::zeros(dim)),
            InitialPoint::Filled { value } => Ok(Vector::new(vec![*value; dim])?),
            InitialPoint::Values { values } => {
                if values.len() != dim {
                    return Err(HarnessError::Config(format!(
                        "x0 has {} entries but the problem has dimension {dim}",
                        values.len()
                    )));
                }
                Ok(Vector::new(values.clone())?)
            }
        }
    }
}

/// Grid of an effective-stepsize sweep: `eta = m / C1`, `C2 = r * C1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub c1_grid: Vec<f64>,
    pub multiplier_grid: Vec<f64>,
    #[serde(default = "default_ratio_grid")]
    pub c2_ratio_grid: Vec<f64>,
}

fn default_ratio_grid() -> Vec<f64> {
    vec![1.0]
}

/// One experiment: a problem, an algorithm, and how to set its noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub algorithm: Algorithm,
    pub problem: ProblemSpec,
    pub sampling: SamplingMode,
    pub horizon: usize,
    pub step_size: StepSize,
    /// Replace `step_size` by the constant rate of the convergence bound,
    /// computed from the problem's `L` and `f*` hints.
    #[serde(default)]
    pub use_convergence_stepsize: bool,
    /// Hand-set noise. Mutually exclusive with `budget`; zero when both are
    /// absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma1: Option<f64>,
    pub clip: ClipConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adam: Option<AdamParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<PrivacyBudget>,
    #[serde(default)]
    pub calibration: CalibrationOptions,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub x0: InitialPoint,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: ExperimentConfig = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.budget.is_some() && self.sigma1.is_some() {
            return Err(HarnessError::Config(
                "sigma1 is computed from the budget and must not be set alongside it".into(),
            ));
        }
        if self.seeds.is_empty() {
            return Err(HarnessError::Config("at least one seed is required".into()));
        }
        if self.algorithm == Algorithm::AdamDiceSgd && self.adam.is_none() {
            return Err(HarnessError::Config(
                "adam_dicesgd needs adam parameters".into(),
            ));
        }
        if let Some(b) = &self.budget {
            b.validate()
                .map_err(|e| HarnessError::Config(e.to_string()))?;
        }
        if let Some(s) = self.sigma1 {
            if !(s >= 0.0) || !s.is_finite() {
                return Err(HarnessError::Config(format!(
                    "sigma1 must be finite and >= 0, got {s}"
                )));
            }
        }
        if let Some(sweep) = &self.sweep {
            if sweep.c1_grid.is_empty()
                || sweep.multiplier_grid.is_empty()
                || sweep.c2_ratio_grid.is_empty()
            {
                return Err(HarnessError::Config("sweep grids must be nonempty".into()));
            }
        }
        self.clip.validate()?;
        self.step_size.validate()?;
        Ok(())
    }

    /// SHA-256 of the canonical JSON of the config with the seeds removed,
    /// so runs that differ only in seed share a hash.
    pub fn hash(&self) -> String {
        let mut value = serde_json::to_value(self).expect("config serializes");
        if let Some(obj) = value.as_object_mut() {
            obj.remove("seeds");
        }
        sha256_hex(value.to_string().as_bytes())
    }

    /// SHA-256 of the canonical JSON of the problem description.
    pub fn problem_hash(&self) -> String {
        let value = serde_json::to_value(&self.problem).expect("problem serializes");
        sha256_hex(value.to_string().as_bytes())
    }

    /// Builds the problem, calibrates the noise, and fixes the step size.
    pub fn resolve(&self) -> Result<Resolved> {
        self.validate()?;
        let problem = self.problem.build()?;
        self.sampling.validate(problem.len())?;
        let x0 = self.x0.build(problem.dim())?;

        let (sigma1, calibration) = match &self.budget {
            Some(budget) => {
                let inputs = self.calibration_inputs(problem.as_ref());
                let cal = accountant::calibrate(self.algorithm, &inputs, budget)
                    .map_err(HarnessError::calibration)?;
                (
                    cal.sigma1,
                    Some(CalibrationRecord::new(budget, inputs, cal)),
                )
            }
            None => (self.sigma1.unwrap_or(0.0), None),
        };

        let step_size = if self.use_convergence_stepsize {
            let hints = problem.hints();
            let (Some(l), Some(fstar)) = (hints.lipschitz, hints.min_value) else {
                return Err(HarnessError::Config(
                    "convergence step size needs L and f* hints from the problem".into(),
                ));
            };
            let gap = problem.loss(&x0)? - fstar;
            StepSize::Constant {
                eta: convergence_stepsize(gap, l, self.horizon, &self.clip, problem.dim(), sigma1)?,
            }
        } else {
            self.step_size.clone()
        };

        let hp = HyperParams {
            step_size,
            sigma1,
            clip: self.clip,
            adam: self.adam,
            horizon: self.horizon,
        };
        hp.validate()?;
        Ok(Resolved {
            problem,
            hp,
            x0,
            calibration,
        })
    }

    pub fn calibration_inputs(&self, problem: &dyn FiniteSum) -> CalibrationInputs {
        let batch = self.sampling.nominal_batch();
        let c = self.calibration.c.unwrap_or(match self.algorithm {
            Algorithm::DpsgdGc => self.clip.c1,
            Algorithm::Automatic => 1.0,
            Algorithm::DiceSgd | Algorithm::AdamDiceSgd => self.clip.c2 * batch.max(1) as f64,
        });
        let g_prime = match self.calibration.g_prime {
            GPrimeSource::Hints => Some(problem.hints().g_prime(self.clip.c1)),
            GPrimeSource::Infinite => None,
            GPrimeSource::Value(g) => Some(g),
        }
        .filter(|g| g.is_finite());
        CalibrationInputs {
            horizon: self.horizon,
            n: problem.len(),
            batch,
            clip: self.clip,
            c,
            g_prime,
            constraints: self.calibration.constraints,
        }
    }
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Accountant inputs and outputs, sufficient to re-derive `sigma1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRecord {
    pub epsilon: f64,
    pub delta: f64,
    pub inputs: CalibrationInputs,
    pub result: Calibration,
}

impl CalibrationRecord {
    fn new(budget: &PrivacyBudget, inputs: CalibrationInputs, result: Calibration) -> Self {
        CalibrationRecord {
            epsilon: budget.epsilon,
            delta: budget.delta,
            inputs,
            result,
        }
    }

    pub fn budget(&self) -> PrivacyBudget {
        PrivacyBudget {
            epsilon: self.epsilon,
            delta: self.delta,
        }
    }
}

/// A config turned into concrete run settings.
pub struct Resolved {
    pub problem: Box<dyn FiniteSum>,
    pub hp: HyperParams,
    pub x0: Vector,
    pub calibration: Option<CalibrationRecord>,
}
