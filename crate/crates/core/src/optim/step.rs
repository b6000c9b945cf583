use crate::clip::{clip, normalize};
use crate::error::{Error, Result};
use crate::noise::NoiseSource;
use crate::optim::{Algorithm, HyperParams, OptimizerState, StepReport};
use crate::problem::FiniteSum;
use crate::sampling::MinibatchSampler;
use crate::vector::Vector;

enum Shrink {
    Clip(f64),
    Normalize,
}

/// Minibatch sums of shrunk and raw per-sample gradients, in index order.
struct BatchPass {
    shrunk_sum: Vector,
    raw_sum: Vector,
    over_threshold: usize,
    size: usize,
}

impl BatchPass {
    fn clip_fraction(&self) -> f64 {
        if self.size == 0 {
            0.0
        } else {
            self.over_threshold as f64 / self.size as f64
        }
    }
}

fn batch_pass<P>(problem: &P, x: &Vector, indices: &[usize], shrink: Shrink) -> Result<BatchPass>
where
    P: FiniteSum + ?Sized,
{
    let d = problem.dim();
    let mut shrunk_sum = Vector::zeros(d);
    let mut raw_sum = Vector::zeros(d);
    let mut over_threshold = 0;
    for &i in indices {
        let g = problem.per_sample_gradient(x, i)?;
        match shrink {
            Shrink::Clip(c) => {
                let out = clip(&g, c)?;
                over_threshold += usize::from(out.was_clipped);
                shrunk_sum.axpy(1.0, &out.clipped)?;
            }
            Shrink::Normalize => {
                over_threshold += usize::from(g.norm() > 1.0);
                shrunk_sum.axpy(1.0, &normalize(&g, 1.0)?)?;
            }
        }
        raw_sum.axpy(1.0, &g)?;
    }
    Ok(BatchPass {
        shrunk_sum,
        raw_sum,
        over_threshold,
        size: indices.len(),
    })
}

/// Full-data loss and gradient norm at `x`.
fn diagnostics<P: FiniteSum + ?Sized>(problem: &P, x: &Vector) -> Result<(f64, f64)> {
    Ok((problem.loss(x)?, problem.full_gradient(x)?.norm()))
}

/// Divisor for minibatch means. A zero nominal batch only arises with an
/// always-empty Poisson batch, whose sums are zero.
fn batch_divisor(sampler: &MinibatchSampler) -> f64 {
    sampler.nominal_batch().max(1) as f64
}

fn check_finite(v: &Vector, what: &str) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::non_finite(what))
    }
}

fn check_state<P: FiniteSum + ?Sized>(state: &OptimizerState, problem: &P) -> Result<()> {
    problem.check_point(&state.x)?;
    for v in [&state.e, &state.m1, &state.m2] {
        if v.dim() != state.x.dim() {
            return Err(Error::DimensionMismatch {
                expected: state.x.dim(),
                actual: v.dim(),
            });
        }
    }
    Ok(())
}

/// One DPSGD-GC iteration: `x' = x - (eta/B)(sum_i clip(g_i, C) + w)` with
/// `w ~ N(0, sigma1^2 I)` and `C = hp.clip.c1`. The error signal is untouched.
pub fn dpsgd_gc_step<P: FiniteSum + ?Sized>(
    state: &mut OptimizerState,
    problem: &P,
    sampler: &mut MinibatchSampler,
    noise: &mut NoiseSource,
    hp: &HyperParams,
) -> Result<StepReport> {
    check_state(state, problem)?;
    let eta = hp.step_size.at(state.t, hp.horizon);
    let (loss, grad_norm) = diagnostics(problem, &state.x)?;
    let batch = sampler.draw(problem.len())?;
    let pass = batch_pass(problem, &state.x, &batch, Shrink::Clip(hp.clip.c1))?;
    let w = noise.gaussian_vector(problem.dim(), hp.sigma1)?;

    let mut update = pass.shrunk_sum.clone();
    update.axpy(1.0, &w)?;
    let mut x = state.x.clone();
    x.axpy(-eta / batch_divisor(sampler), &update)?;
    check_finite(&x, "iterate")?;

    let report = StepReport {
        t: state.t,
        loss,
        grad_norm,
        alpha_e: 1.0,
        e_norm: state.e.norm(),
        clip_fraction: pass.clip_fraction(),
        realized_batch: pass.size,
    };
    state.x = x;
    state.t += 1;
    Ok(report)
}

/// Noiseless error-feedback direction and its ingredients.
struct Direction {
    /// `(1/B) sum shrink(g_i) + shrink(e)`.
    v: Vector,
    /// Unclipped minibatch mean `(1/B) sum g_i`.
    raw_mean: Vector,
    alpha_e: f64,
    pass: BatchPass,
}

fn feedback_direction<P: FiniteSum + ?Sized>(
    state: &OptimizerState,
    problem: &P,
    sampler: &mut MinibatchSampler,
    hp: &HyperParams,
    automatic: bool,
) -> Result<Direction> {
    let batch = sampler.draw(problem.len())?;
    let b = batch_divisor(sampler);
    let (pass, e_term, alpha_e) = if automatic {
        let pass = batch_pass(problem, &state.x, &batch, Shrink::Normalize)?;
        let e_norm = state.e.norm();
        let alpha_e = if e_norm > 1.0 { 1.0 / e_norm } else { 1.0 };
        (pass, normalize(&state.e, 1.0)?, alpha_e)
    } else {
        let pass = batch_pass(problem, &state.x, &batch, Shrink::Clip(hp.clip.c1))?;
        let out = clip(&state.e, hp.clip.c2)?;
        (pass, out.clipped, out.factor)
    };
    let mut v = pass.shrunk_sum.scale(1.0 / b);
    v.axpy(1.0, &e_term)?;
    let raw_mean = pass.raw_sum.scale(1.0 / b);
    Ok(Direction {
        v,
        raw_mean,
        alpha_e,
        pass,
    })
}

/// `e' = e + raw_mean - v`.
fn feedback_update(e: &Vector, dir: &Direction) -> Result<Vector> {
    let mut next = e.clone();
    next.axpy(1.0, &dir.raw_mean)?;
    next.axpy(-1.0, &dir.v)?;
    check_finite(&next, "error-feedback signal")?;
    Ok(next)
}

fn plain_feedback_step<P: FiniteSum + ?Sized>(
    state: &mut OptimizerState,
    problem: &P,
    sampler: &mut MinibatchSampler,
    noise: &mut NoiseSource,
    hp: &HyperParams,
    automatic: bool,
) -> Result<StepReport> {
    check_state(state, problem)?;
    let eta = hp.step_size.at(state.t, hp.horizon);
    let (loss, grad_norm) = diagnostics(problem, &state.x)?;
    let dir = feedback_direction(state, problem, sampler, hp, automatic)?;
    let w = noise.gaussian_vector(problem.dim(), hp.sigma1)?;

    let mut x = state.x.clone();
    x.axpy(-eta, &dir.v)?;
    x.axpy(-eta, &w)?;
    check_finite(&x, "iterate")?;
    let e = feedback_update(&state.e, &dir)?;

    let report = StepReport {
        t: state.t,
        loss,
        grad_norm,
        alpha_e: dir.alpha_e,
        e_norm: state.e.norm(),
        clip_fraction: dir.pass.clip_fraction(),
        realized_batch: dir.pass.size,
    };
    state.x = x;
    state.e = e;
    state.t += 1;
    Ok(report)
}

/// One DiceSGD iteration:
/// `v = (1/B) sum clip(g_i, C1) + clip(e, C2)`, `x' = x - eta (v + w)`,
/// `e' = e + (1/B) sum g_i - v`.
pub fn dicesgd_step<P: FiniteSum + ?Sized>(
    state: &mut OptimizerState,
    problem: &P,
    sampler: &mut MinibatchSampler,
    noise: &mut NoiseSource,
    hp: &HyperParams,
) -> Result<StepReport> {
    plain_feedback_step(state, problem, sampler, noise, hp, false)
}

/// One automatic DiceSGD iteration. Both clip operations are replaced by
/// normalization to unit norm and the thresholds in `hp.clip` are ignored.
/// The reported `alpha_e` is `min{1, 1/||e||}`.
pub fn automatic_dicesgd_step<P: FiniteSum + ?Sized>(
    state: &mut OptimizerState,
    problem: &P,
    sampler: &mut MinibatchSampler,
    noise: &mut NoiseSource,
    hp: &HyperParams,
) -> Result<StepReport> {
    plain_feedback_step(state, problem, sampler, noise, hp, true)
}

/// One Adam-DiceSGD iteration.
///
/// The moments consume the noisy direction `v + w`; the error signal is
/// updated with the noiseless `v`. Bias correction at iteration `t` uses the
/// exponent `t + 1`.
pub fn adam_dicesgd_step<P: FiniteSum + ?Sized>(
    state: &mut OptimizerState,
    problem: &P,
    sampler: &mut MinibatchSampler,
    noise: &mut NoiseSource,
    hp: &HyperParams,
) -> Result<StepReport> {
    let adam = hp
        .adam
        .ok_or_else(|| Error::config("adam_dicesgd requires Adam parameters"))?;
    check_state(state, problem)?;
    let eta = hp.step_size.at(state.t, hp.horizon);
    let (loss, grad_norm) = diagnostics(problem, &state.x)?;
    let dir = feedback_direction(state, problem, sampler, hp, false)?;
    let w = noise.gaussian_vector(problem.dim(), hp.sigma1)?;
    let noisy = dir.v.add(&w)?;

    let k = (state.t + 1) as i32;
    let bias1 = 1.0 - adam.beta1.powi(k);
    let bias2 = 1.0 - adam.beta2.powi(k);
    let mut m1 = state.m1.clone();
    let mut m2 = state.m2.clone();
    let mut x = state.x.clone();
    {
        let m1s = m1.as_mut_slice();
        let m2s = m2.as_mut_slice();
        let xs = x.as_mut_slice();
        for (j, &vj) in noisy.as_slice().iter().enumerate() {
            m1s[j] = adam.beta1 * m1s[j] + (1.0 - adam.beta1) * vj;
            m2s[j] = adam.beta2 * m2s[j] + (1.0 - adam.beta2) * vj * vj;
            let m1_hat = m1s[j] / bias1;
            let m2_hat = m2s[j] / bias2;
            xs[j] -= eta * m1_hat / (m2_hat.sqrt() + adam.eps);
        }
    }
    check_finite(&x, "iterate")?;
    check_finite(&m1, "first moment")?;
    check_finite(&m2, "second moment")?;
    let e = feedback_update(&state.e, &dir)?;

    let report = StepReport {
        t: state.t,
        loss,
        grad_norm,
        alpha_e: dir.alpha_e,
        e_norm: state.e.norm(),
        clip_fraction: dir.pass.clip_fraction(),
        realized_batch: dir.pass.size,
    };
    state.x = x;
    state.e = e;
    state.m1 = m1;
    state.m2 = m2;
    state.t += 1;
    Ok(report)
}

/// Dispatches one iteration of `algorithm`.
pub fn step<P: FiniteSum + ?Sized>(
    algorithm: Algorithm,
    state: &mut OptimizerState,
    problem: &P,
    sampler: &mut MinibatchSampler,
    noise: &mut NoiseSource,
    hp: &HyperParams,
) -> Result<StepReport> {
    match algorithm {
        Algorithm::DpsgdGc => dpsgd_gc_step(state, problem, sampler, noise, hp),
        Algorithm::DiceSgd => dicesgd_step(state, problem, sampler, noise, hp),
        Algorithm::AdamDiceSgd => adam_dicesgd_step(state, problem, sampler, noise, hp),
        Algorithm::Automatic => automatic_dicesgd_step(state, problem, sampler, noise, hp),
    }
}
