//! Minibatch selection.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::unit_uniform;

/// Stream id reserved for minibatch sampling.
pub const SAMPLING_STREAM: u64 = 0;

/// How a minibatch is drawn. Both modes carry the nominal batch size `B`
/// that normalizes the minibatch average.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SamplingMode {
    /// Each index is included independently with probability `B / N`.
    Poisson { batch: usize },
    /// Exactly `B` distinct indices, uniformly at random.
    Uniform { batch: usize },
}

impl SamplingMode {
    pub fn nominal_batch(&self) -> usize {
        match *self {
            SamplingMode::Poisson { batch } | SamplingMode::Uniform { batch } => batch,
        }
    }

    pub fn is_poisson(&self) -> bool {
        matches!(self, SamplingMode::Poisson { .. })
    }

    /// Checks the mode against a dataset of size `n`.
    pub fn validate(&self, n: usize) -> Result<()> {
        if n == 0 {
            return Err(Error::config("dataset must contain at least one sample"));
        }
        let batch = self.nominal_batch();
        if batch > n {
            return Err(Error::config(format!(
                "batch size {batch} exceeds dataset size {n}"
            )));
        }
        if batch == 0 && !self.is_poisson() {
            return Err(Error::config("uniform sampling needs a batch size >= 1"));
        }
        Ok(())
    }
}

/// Seeded minibatch sampler. Indices are returned in increasing order.
#[derive(Debug, Clone)]
pub struct MinibatchSampler {
    mode: SamplingMode,
    rng: ChaCha20Rng,
    seed: u64,
}

impl MinibatchSampler {
    pub fn new(mode: SamplingMode, seed: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(SAMPLING_STREAM);
        MinibatchSampler { mode, rng, seed }
    }

    pub fn mode(&self) -> SamplingMode {
        self.mode
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn nominal_batch(&self) -> usize {
        self.mode.nominal_batch()
    }

    /// Draws one minibatch from `{0, ..., n-1}`.
    pub fn draw(&mut self, n: usize) -> Result<Vec<usize>> {
        self.mode.validate(n)?;
        match self.mode {
            SamplingMode::Poisson { batch } => {
                let rate = batch as f64 / n as f64;
                if rate == 0.0 {
                    return Ok(Vec::new());
                }
                Ok((0..n)
                    .filter(|_| unit_uniform(&mut self.rng) < rate)
                    .collect())
            }
            SamplingMode::Uniform { batch } => {
                if batch == n {
                    return Ok((0..n).collect());
                }
                let mut picked = rand::seq::index::sample(&mut self.rng, n, batch).into_vec();
                picked.sort_unstable();
                Ok(picked)
            }
        }
    }
}
