//! Differentially private training loops.
//!
//! Four update rules share one driver:
//!
//! * [`Algorithm::DpsgdGc`]: clipped per-sample gradients plus Gaussian noise
//!   on the sum.
//! * [`Algorithm::DiceSgd`]: clipped gradients plus a separately clipped
//!   error-feedback signal `e` that accumulates what clipping removed.
//! * [`Algorithm::AdamDiceSgd`]: the same direction fed through Adam moments.
//! * [`Algorithm::Automatic`]: normalization replaces both clip operations.
//!
//! Minibatch sums run in increasing index order and the noise comes from a
//! stream separate from sampling, so a run is a pure function of its seeds.

mod convergence;
mod run;
mod schedule;
mod state;
mod step;

pub use convergence::{convergence_rate_bound, convergence_stepsize, convergence_threshold_check};
pub use run::{run, RunSeeds, Trace};
pub use schedule::StepSize;
pub use state::{OptimizerState, StepReport};
pub use step::{adam_dicesgd_step, automatic_dicesgd_step, dicesgd_step, dpsgd_gc_step, step};

use serde::{Deserialize, Serialize};

use crate::clip::ClipConfig;
use crate::error::{Error, Result};

/// Which update rule a run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    DpsgdGc,
    #[serde(rename = "dicesgd")]
    DiceSgd,
    #[serde(rename = "adam_dicesgd")]
    AdamDiceSgd,
    Automatic,
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::DpsgdGc => "dpsgd_gc",
            Algorithm::DiceSgd => "dicesgd",
            Algorithm::AdamDiceSgd => "adam_dicesgd",
            Algorithm::Automatic => "automatic",
        }
    }

    pub fn uses_error_feedback(&self) -> bool {
        !matches!(self, Algorithm::DpsgdGc)
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dpsgd_gc" => Ok(Algorithm::DpsgdGc),
            "dicesgd" => Ok(Algorithm::DiceSgd),
            "adam_dicesgd" => Ok(Algorithm::AdamDiceSgd),
            "automatic" => Ok(Algorithm::Automatic),
            other => Err(Error::config(format!("unknown algorithm {other:?}"))),
        }
    }
}

/// Adam moment parameters `(beta1, beta2, eps1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamParams {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        AdamParams {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamParams {
    pub fn validate(&self) -> Result<()> {
        let unit = |b: f64| (0.0..1.0).contains(&b);
        if !unit(self.beta1) || !unit(self.beta2) {
            return Err(Error::config("Adam betas must lie in [0, 1)"));
        }
        if !(self.eps > 0.0) {
            return Err(Error::config("Adam eps must be positive"));
        }
        Ok(())
    }
}

/// Hyperparameters of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub step_size: StepSize,
    /// Noise standard deviation. For DPSGD-GC it is added to the clipped
    /// gradient sum, for the error-feedback methods to the averaged direction.
    pub sigma1: f64,
    pub clip: ClipConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adam: Option<AdamParams>,
    /// Number of iterations `T`.
    pub horizon: usize,
}

impl HyperParams {
    pub fn constant(eta: f64, sigma1: f64, clip: ClipConfig, horizon: usize) -> Self {
        HyperParams {
            step_size: StepSize::Constant { eta },
            sigma1,
            clip,
            adam: None,
            horizon,
        }
    }

    pub fn with_adam(mut self, adam: AdamParams) -> Self {
        self.adam = Some(adam);
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.step_size.validate()?;
        if !(self.sigma1 >= 0.0) || !self.sigma1.is_finite() {
            return Err(Error::config(format!(
                "sigma1 must be finite and >= 0, got {}",
                self.sigma1
            )));
        }
        self.clip.validate()?;
        if let Some(adam) = &self.adam {
            adam.validate()?;
        }
        Ok(())
    }
}
