use serde::{Deserialize, Serialize};

use crate::clip::ClipConfig;
use crate::error::{Error, Result};
use crate::noise::{NoiseSource, NOISE_STREAM};
use crate::optim::{dicesgd_step, HyperParams, OptimizerState};
use crate::oracle::clip_slice;
use crate::problem::FiniteSum;
use crate::sampling::{MinibatchSampler, SamplingMode};
use crate::vector::Vector;

/// Longest horizon the straight-line check accepts.
pub const MAX_EQUIVALENCE_HORIZON: usize = 50;

/// Deliberate defects for testing the sensitivity of the check.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fault {
    #[default]
    None,
    /// The reference feeds back the previous iteration's clipped error.
    StaleErrorClip,
    /// The reference runs one more iteration than the optimizer.
    ExtraIteration,
}

/// Largest per-coordinate gap between the optimizer and the reference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub horizon: usize,
    pub x_deviation: f64,
    pub e_deviation: f64,
}

impl EquivalenceReport {
    pub fn max_deviation(&self) -> f64 {
        self.x_deviation.max(self.e_deviation)
    }
}

/// Reference DiceSGD trajectory: full batch, no noise, written out directly.
fn transcription<P: FiniteSum + ?Sized>(
    problem: &P,
    clip: &ClipConfig,
    eta: f64,
    x0: &[f64],
    horizon: usize,
    fault: Fault,
) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    let n = problem.len();
    let d = problem.dim();
    let mut x = x0.to_vec();
    let mut e = vec![0.0; d];
    let mut stale = vec![0.0; d];
    let mut out = Vec::with_capacity(horizon + 1);
    let steps = if fault == Fault::ExtraIteration {
        horizon + 1
    } else {
        horizon
    };
    for _ in 0..steps {
        let xv = Vector::new(x.clone())?;
        let mut clipped_mean = vec![0.0; d];
        let mut raw_mean = vec![0.0; d];
        for i in 0..n {
            let g = problem.per_sample_gradient(&xv, i)?;
            let cg = clip_slice(g.as_slice(), clip.c1);
            for j in 0..d {
                clipped_mean[j] += cg[j];
                raw_mean[j] += g[j];
            }
        }
        for j in 0..d {
            clipped_mean[j] /= n as f64;
            raw_mean[j] /= n as f64;
        }
        let ce = clip_slice(&e, clip.c2);
        let fed = if fault == Fault::StaleErrorClip {
            stale.clone()
        } else {
            ce.clone()
        };
        stale = ce;
        let v: Vec<f64> = (0..d).map(|j| clipped_mean[j] + fed[j]).collect();
        for j in 0..d {
            x[j] -= eta * v[j];
            e[j] += raw_mean[j] - v[j];
        }
        out.push((x.clone(), e.clone()));
    }
    Ok(out)
}

/// Runs full-batch, noiseless DiceSGD through the optimizer and through an
/// independent transcription, and returns the largest gap over all
/// iterations. Under [`Fault::ExtraIteration`] the final iterates are
/// compared against the reference's extra step.
pub fn small_instance_equivalence<P: FiniteSum + ?Sized>(
    problem: &P,
    clip: &ClipConfig,
    eta: f64,
    x0: &Vector,
    horizon: usize,
    fault: Fault,
) -> Result<EquivalenceReport> {
    if horizon > MAX_EQUIVALENCE_HORIZON {
        return Err(Error::config(format!(
            "equivalence check supports T <= {MAX_EQUIVALENCE_HORIZON}, got {horizon}"
        )));
    }
    problem.check_point(x0)?;
    let reference = transcription(problem, clip, eta, x0.as_slice(), horizon, fault)?;
    let hp = HyperParams::constant(eta, 0.0, *clip, horizon);
    let mut sampler = MinibatchSampler::new(
        SamplingMode::Uniform {
            batch: problem.len(),
        },
        0,
    );
    let mut noise = NoiseSource::new(0, NOISE_STREAM);
    let mut state = OptimizerState::new(x0.clone());
    let mut x_dev: f64 = 0.0;
    let mut e_dev: f64 = 0.0;
    for t in 0..horizon {
        dicesgd_step(&mut state, problem, &mut sampler, &mut noise, &hp)?;
        let idx = if fault == Fault::ExtraIteration && t + 1 == horizon {
            t + 1
        } else {
            t
        };
        let (rx, re) = &reference[idx];
        for j in 0..problem.dim() {
            x_dev = x_dev.max((state.x[j] - rx[j]).abs());
            e_dev = e_dev.max((state.e[j] - re[j]).abs());
        }
    }
    Ok(EquivalenceReport {
        horizon,
        x_deviation: x_dev,
        e_deviation: e_dev,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::build_counterexample;
    use crate::problem::{Logistic, Quadratic};

    fn cases() -> Vec<(Box<dyn FiniteSum>, Vector)> {
        vec![
            (
                Box::new(build_counterexample(1.0).unwrap()),
                Vector::scalar(1.0),
            ),
            (
                Box::new(Quadratic::synthetic(4, 12, 3.0, 1.0, 0.5, 2).unwrap()),
                Vector::filled(4, -1.0),
            ),
            (
                Box::new(Logistic::two_gaussians(3, 10, 1.0, 5).unwrap()),
                Vector::filled(3, 0.2),
            ),
        ]
    }

    #[test]
    fn matches_with_and_without_clipping() {
        for (p, x0) in cases() {
            for clip in [
                ClipConfig::new(1e-2, 2e-2).unwrap(),
                ClipConfig::single(1e6).unwrap(),
            ] {
                let r = small_instance_equivalence(p.as_ref(), &clip, 0.1, &x0, 50, Fault::None)
                    .unwrap();
                assert!(r.max_deviation() <= 1e-12, "{} {:?}", p.describe(), r);
            }
        }
    }

    #[test]
    fn injected_faults_are_detected() {
        for (p, x0) in cases() {
            let clip = ClipConfig::new(1e-2, 2e-2).unwrap();
            for fault in [Fault::StaleErrorClip, Fault::ExtraIteration] {
                let r = small_instance_equivalence(p.as_ref(), &clip, 0.1, &x0, 20, fault).unwrap();
                assert!(r.max_deviation() > 1e-6, "{} {fault:?} {r:?}", p.describe());
            }
        }
    }

    #[test]
    fn rejects_long_horizons() {
        let p = build_counterexample(1.0).unwrap();
        let clip = ClipConfig::single(1.0).unwrap();
        assert!(
            small_instance_equivalence(&p, &clip, 0.1, &Vector::scalar(0.0), 51, Fault::None)
                .is_err()
        );
    }
}
