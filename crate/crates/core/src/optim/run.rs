use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::{NoiseSource, NOISE_STREAM};
use crate::optim::{step, Algorithm, HyperParams, OptimizerState, StepReport};
use crate::problem::FiniteSum;
use crate::sampling::{MinibatchSampler, SamplingMode};
use crate::vector::Vector;

/// Seeds for the two random streams of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RunSeeds {
    pub sampling: u64,
    pub noise: u64,
}

impl RunSeeds {
    /// Same seed for both streams; the stream ids keep them independent.
    pub fn from_seed(seed: u64) -> Self {
        RunSeeds {
            sampling: seed,
            noise: seed,
        }
    }
}

/// Per-iteration reports and the final state of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub algorithm: Algorithm,
    pub reports: Vec<StepReport>,
    pub final_state: OptimizerState,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.reports.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reports.is_empty()
    }

    pub fn alpha_e(&self) -> Vec<f64> {
        self.reports.iter().map(|r| r.alpha_e).collect()
    }
}

/// Runs `hp.horizon` iterations of `algorithm` from `x0`.
///
/// Any step error is wrapped in [`Error::AtIteration`].
pub fn run<P: FiniteSum + ?Sized>(
    algorithm: Algorithm,
    problem: &P,
    hp: &HyperParams,
    mode: SamplingMode,
    seeds: RunSeeds,
    x0: Vector,
) -> Result<Trace> {
    hp.validate()?;
    mode.validate(problem.len())?;
    problem.check_point(&x0)?;
    let mut sampler = MinibatchSampler::new(mode, seeds.sampling);
    let mut noise = NoiseSource::new(seeds.noise, NOISE_STREAM);
    let mut state = OptimizerState::new(x0);
    let mut reports = Vec::with_capacity(hp.horizon);
    for t in 0..hp.horizon {
        let report = step(algorithm, &mut state, problem, &mut sampler, &mut noise, hp).map_err(
            |source| Error::AtIteration {
                iteration: t,
                source: Box::new(source),
            },
        )?;
        reports.push(report);
    }
    Ok(Trace {
        algorithm,
        reports,
        final_state: state,
    })
}
