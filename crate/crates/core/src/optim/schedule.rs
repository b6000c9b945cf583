use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Step-size schedule `eta^t` over a horizon of `T` iterations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepSize {
    Constant {
        eta: f64,
    },
    /// `eta (1 - t/T)`, positive for every `t < T`.
    LinearDecay {
        eta: f64,
    },
    /// Linear ramp to `eta` over `warmup` iterations, then linear decay.
    WarmupLinear {
        eta: f64,
        warmup: usize,
    },
    /// Explicit per-iteration values; the last value repeats past the end.
    PerIteration {
        values: Vec<f64>,
    },
}

impl StepSize {
    pub fn constant(eta: f64) -> Self {
        StepSize::Constant { eta }
    }

    /// Step size at iteration `t` of a run with `horizon` iterations.
    pub fn at(&self, t: usize, horizon: usize) -> f64 {
        let horizon = horizon.max(1) as f64;
        let t_f = t as f64;
        match self {
            StepSize::Constant { eta } => *eta,
            StepSize::LinearDecay { eta } => eta * (1.0 - t_f / horizon).max(0.0),
            StepSize::WarmupLinear { eta, warmup } => {
                let w = *warmup as f64;
                if t < *warmup {
                    eta * (t_f + 1.0) / w
                } else if horizon > w {
                    eta * ((horizon - t_f) / (horizon - w)).max(0.0)
                } else {
                    *eta
                }
            }
            StepSize::PerIteration { values } => {
                values.get(t).or(values.last()).copied().unwrap_or(0.0)
            }
        }
    }

    /// Peak value of the schedule.
    pub fn peak(&self) -> f64 {
        match self {
            StepSize::Constant { eta }
            | StepSize::LinearDecay { eta }
            | StepSize::WarmupLinear { eta, .. } => *eta,
            StepSize::PerIteration { values } => values.iter().cloned().fold(0.0, f64::max),
        }
    }

    /// Multiplies every step by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        match self {
            StepSize::Constant { eta } => StepSize::Constant { eta: eta * factor },
            StepSize::LinearDecay { eta } => StepSize::LinearDecay { eta: eta * factor },
            StepSize::WarmupLinear { eta, warmup } => StepSize::WarmupLinear {
                eta: eta * factor,
                warmup: *warmup,
            },
            StepSize::PerIteration { values } => StepSize::PerIteration {
                values: values.iter().map(|v| v * factor).collect(),
            },
        }
    }

    /// Step sizes must be finite and nonnegative. Zero is accepted so a
    /// frozen run (`x' = x`) can be expressed.
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        let valid = match self {
            StepSize::Constant { eta } | StepSize::LinearDecay { eta } => ok(*eta),
            StepSize::WarmupLinear { eta, warmup } => ok(*eta) && *warmup > 0,
            StepSize::PerIteration { values } => {
                !values.is_empty() && values.iter().all(|v| ok(*v))
            }
        };
        if valid {
            Ok(())
        } else {
            Err(Error::config(format!(
                "invalid step-size schedule {self:?}"
            )))
        }
    }
}
