//! Per-iteration RDP cost of the error-feedback methods.

use serde::{Deserialize, Serialize};

use crate::clip::ClipConfig;
use crate::error::{Error, Result};

/// Which clipped error-signal magnitude enters the per-iteration cost.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EpsilonVariant {
    /// `min{C2^2, G'^2}`.
    Plain,
    /// `min{C2^2 B^2, G'^2} / B^2`.
    BatchScaled { batch: usize },
}

/// Growth factor of the error-signal sensitivity at
/// iteration `t`: `(m (t + 1) + 2) / (max{m (t - 1), 0} + 1)` with
/// `m = max{G' - C2, 0} / C2`.
///
/// For `G' = +inf` the limit is taken explicitly: `+inf` for `t <= 1` and
/// `(t + 1)/(t - 1)` afterwards.
pub fn sensitivity_ratio(t: usize, c2: f64, g_prime: f64) -> f64 {
    let t_f = t as f64;
    if g_prime.is_infinite() {
        return if t <= 1 {
            f64::INFINITY
        } else {
            (t_f + 1.0) / (t_f - 1.0)
        };
    }
    let m = (g_prime - c2).max(0.0) / c2;
    (m * (t_f + 1.0) + 2.0) / ((m * (t_f - 1.0)).max(0.0) + 1.0)
}

fn check(sigma1: f64, n: usize, alpha: f64, g_prime: f64) -> Result<()> {
    if !(sigma1 > 0.0) || !sigma1.is_finite() {
        return Err(Error::domain(format!(
            "sigma1 must be positive, got {sigma1}"
        )));
    }
    if n == 0 {
        return Err(Error::domain("dataset size must be >= 1"));
    }
    if !(alpha > 1.0) || !alpha.is_finite() {
        return Err(Error::domain(format!(
            "Renyi order must exceed 1, got {alpha}"
        )));
    }
    if !(g_prime >= 0.0) {
        return Err(Error::domain(format!("G' must be >= 0, got {g_prime}")));
    }
    Ok(())
}

/// Order-`alpha` RDP cost of iteration `t`:
/// `16 alpha / (sigma1^2 N^2) * (C1^2 + ratio(t) * min{C2^2, G'^2})`,
/// with the error-signal term chosen by `variant`.
pub fn dicesgd_epsilon_t(
    t: usize,
    sigma1: f64,
    n: usize,
    clip: &ClipConfig,
    g_prime: f64,
    alpha: f64,
    variant: EpsilonVariant,
) -> Result<f64> {
    check(sigma1, n, alpha, g_prime)?;
    clip.validate()?;
    let error_term = match variant {
        EpsilonVariant::Plain => (clip.c2 * clip.c2).min(g_prime * g_prime),
        EpsilonVariant::BatchScaled { batch } => {
            if batch == 0 {
                return Err(Error::domain("batch size must be >= 1"));
            }
            let b2 = (batch * batch) as f64;
            (clip.c2 * clip.c2 * b2).min(g_prime * g_prime) / b2
        }
    };
    let ratio = sensitivity_ratio(t, clip.c2, g_prime);
    // A zero error term has zero cost even when the ratio is unbounded.
    let feedback = if error_term == 0.0 {
        0.0
    } else {
        ratio * error_term
    };
    let n = n as f64;
    Ok(16.0 * alpha / (sigma1 * sigma1 * n * n) * (clip.c1 * clip.c1 + feedback))
}

/// `sum_{t < T} dicesgd_epsilon_t`, summed in iteration order.
pub fn dicesgd_epsilon_sum(
    horizon: usize,
    sigma1: f64,
    n: usize,
    clip: &ClipConfig,
    g_prime: f64,
    alpha: f64,
    variant: EpsilonVariant,
) -> Result<f64> {
    let mut total = 0.0;
    for t in 0..horizon {
        total += dicesgd_epsilon_t(t, sigma1, n, clip, g_prime, alpha, variant)?;
    }
    Ok(total)
}

/// `G~ = C1^2 + 2 min{C^2, G'^2}`.
pub fn g_tilde(c1: f64, c: f64, g_prime: f64) -> f64 {
    c1 * c1 + 2.0 * (c * c).min(g_prime * g_prime)
}

/// Closed-form bound on the composed cost over `T` iterations:
/// `16 alpha T G~ / (sigma1^2 N^2)`.
pub fn dicesgd_rdp_bound(
    horizon: usize,
    sigma1: f64,
    n: usize,
    c1: f64,
    c: f64,
    g_prime: f64,
    alpha: f64,
) -> Result<f64> {
    check(sigma1, n, alpha, g_prime)?;
    let n = n as f64;
    Ok(16.0 * alpha * horizon as f64 * g_tilde(c1, c, g_prime) / (sigma1 * sigma1 * n * n))
}
