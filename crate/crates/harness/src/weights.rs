//! Iterate weights for the weighted gradient-norm statistic.
//!
//! The convergence bound holds for an iterate drawn with probability
//! proportional to `A_t = 1 - prod_{tau=t+1}^{T-1} (1 - alpha_e^tau)`, where
//! `alpha_e^tau` is the clip factor applied to the error signal. The last
//! weight is one minus the empty product, so it is zero.

use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};
use crate::trace::RunTrace;

/// `A_t` for every `t < T`, from recorded clip factors in `(0, 1]`.
pub fn iterate_weights(alpha_e: &[f64]) -> Result<Vec<f64>> {
    if let Some((t, a)) = alpha_e
        .iter()
        .enumerate()
        .find(|(_, &a)| !(a > 0.0 && a <= 1.0))
    {
        return Err(HarnessError::Config(format!(
            "alpha_e at t = {t} is {a}, outside (0, 1]"
        )));
    }
    let mut weights = vec![0.0; alpha_e.len()];
    let mut tail = 1.0;
    for t in (0..alpha_e.len().saturating_sub(1)).rev() {
        tail *= 1.0 - alpha_e[t + 1];
        weights[t] = 1.0 - tail;
    }
    Ok(weights)
}

/// Weighted and last-iterate squared gradient norms of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedSummary {
    pub weights: Vec<f64>,
    /// `sum_t A_t ||grad f(x^t)||^2 / sum_t A_t`.
    pub weighted_mean_sq_grad: f64,
    pub last_sq_grad: f64,
    pub last_weight_is_empty_product: bool,
}

pub fn weighted_grad_summary(trace: &RunTrace) -> Result<WeightedSummary> {
    let grads: Vec<f64> = trace.reports.iter().map(|r| r.grad_norm).collect();
    let weights = iterate_weights(&trace.alpha_e())?;
    summarize(weights, &grads, trace.metadata.final_grad_norm)
}

/// Weighted summary of `grad_norms` under `weights`; `final_grad_norm` is
/// the norm at the iterate after the last step.
pub fn summarize(
    weights: Vec<f64>,
    grad_norms: &[f64],
    final_grad_norm: f64,
) -> Result<WeightedSummary> {
    if weights.len() != grad_norms.len() {
        return Err(HarnessError::Config(format!(
            "{} weights for {} gradient norms",
            weights.len(),
            grad_norms.len()
        )));
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(HarnessError::Numerical(
            "all iterate weights are zero; the weighted summary is undefined".into(),
        ));
    }
    let weighted = weights
        .iter()
        .zip(grad_norms)
        .map(|(w, g)| w * g * g)
        .sum::<f64>()
        / total;
    Ok(WeightedSummary {
        last_weight_is_empty_product: weights.last().is_some_and(|&w| w == 0.0),
        weights,
        weighted_mean_sq_grad: weighted,
        last_sq_grad: final_grad_norm * final_grad_norm,
    })
}
