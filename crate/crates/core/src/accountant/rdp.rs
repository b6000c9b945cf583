//! Renyi-DP primitives. All logarithms are natural.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_order(alpha: f64) -> Result<()> {
    if alpha > 1.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "Renyi order must exceed 1, got {alpha}"
        )))
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "delta must lie in (0, 1), got {delta}"
        )))
    }
}

/// Order-`alpha` Renyi divergence between `N(a, sigma^2)` and
/// `N(b, sigma^2)` with `|a - b| = distance`: `alpha distance^2 / (2 sigma^2)`.
pub fn gaussian_rdp(distance: f64, sigma: f64, alpha: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::domain(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    check_order(alpha)?;
    Ok(alpha * distance * distance / (2.0 * sigma * sigma))
}

/// Weak triangle inequality for Renyi divergences:
/// `(1 + beta) eps_ac + (1 + 1/beta) eps_cb`.
pub fn rdp_triangle(eps_ac: f64, eps_cb: f64, beta: f64) -> Result<f64> {
    if !(beta > 0.0) {
        return Err(Error::domain(format!("beta must be positive, got {beta}")));
    }
    Ok((1.0 + beta) * eps_ac + (1.0 + 1.0 / beta) * eps_cb)
}

/// Why the subsampled Gaussian bound does not apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InvalidReason {
    /// Sampling rate outside `[0, 1/5]`.
    RateTooLarge,
    /// Noise multiplier `sigma / sensitivity` not above 4.
    NoiseTooSmall,
    /// Order outside the range where the bound is proven.
    OrderOutOfRange,
    /// Non-finite or negative input.
    BadInput,
}

/// Output of [`subsampled_gaussian_rdp`]. An inapplicable bound is a value,
/// not an error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", content = "value", rename_all = "snake_case")]
pub enum SubsampledRdp {
    Valid(f64),
    Invalid(InvalidReason),
}

impl SubsampledRdp {
    pub fn value(&self) -> Option<f64> {
        match *self {
            SubsampledRdp::Valid(v) => Some(v),
            SubsampledRdp::Invalid(_) => None,
        }
    }

    pub fn is_valid(&self) -> bool {
        matches!(self, SubsampledRdp::Valid(_))
    }
}

/// Largest sampling rate covered by the subsampled Gaussian bound.
pub const MAX_SAMPLING_RATE: f64 = 0.2;

/// Order-`alpha` RDP of the Poisson-subsampled Gaussian mechanism with rate
/// `p`, L2 sensitivity `sensitivity`, and noise standard deviation `sigma`:
/// `2 p^2 sensitivity^2 alpha / sigma^2`.
///
/// The bound holds when `p <= 1/5`, the multiplier `s = sigma / sensitivity`
/// exceeds 4, and, with `c3 = 1 + 1/(p (alpha - 1))`,
///
/// * `alpha <= s^2 c3 / 2 - 2 ln s`, and
/// * `alpha <= (s^2 c3^2 / 2 - ln 5 - 2 ln s) / (c3 + ln(p alpha) + 1/(2 s^2))`.
///
/// Otherwise the result is [`SubsampledRdp::Invalid`].
pub fn subsampled_gaussian_rdp(p: f64, sensitivity: f64, sigma: f64, alpha: f64) -> SubsampledRdp {
    use InvalidReason::*;
    if !(p >= 0.0) || !p.is_finite() || !(sensitivity >= 0.0) || !sensitivity.is_finite() {
        return SubsampledRdp::Invalid(BadInput);
    }
    if !(sigma > 0.0) || !sigma.is_finite() || !(alpha > 1.0) || !alpha.is_finite() {
        return SubsampledRdp::Invalid(BadInput);
    }
    if p > MAX_SAMPLING_RATE {
        return SubsampledRdp::Invalid(RateTooLarge);
    }
    if p == 0.0 || sensitivity == 0.0 {
        return SubsampledRdp::Valid(0.0);
    }
    let s = sigma / sensitivity;
    if !(s > 4.0) {
        return SubsampledRdp::Invalid(NoiseTooSmall);
    }
    let c3 = 1.0 + 1.0 / (p * (alpha - 1.0));
    let first = 0.5 * s * s * c3 - 2.0 * s.ln();
    let denom = c3 + (p * alpha).ln() + 1.0 / (2.0 * s * s);
    let second = (0.5 * s * s * c3 * c3 - 5f64.ln() - 2.0 * s.ln()) / denom;
    if !(alpha <= first) || !(denom > 0.0) || !(alpha <= second) {
        return SubsampledRdp::Invalid(OrderOutOfRange);
    }
    SubsampledRdp::Valid(2.0 * p * p * alpha / (s * s))
}

/// `(alpha, eps_rdp)`-RDP implies `(eps_rdp + ln(1/delta)/(alpha - 1), delta)`-DP.
pub fn rdp_to_dp(alpha: f64, eps_rdp: f64, delta: f64) -> Result<f64> {
    check_order(alpha)?;
    check_delta(delta)?;
    if !(eps_rdp >= 0.0) {
        return Err(Error::domain(format!(
            "RDP epsilon must be >= 0, got {eps_rdp}"
        )));
    }
    Ok(eps_rdp + (1.0 / delta).ln() / (alpha - 1.0))
}

/// Integer orders used for every optimization over `alpha`.
pub const ALPHA_MIN: u32 = 2;
pub const ALPHA_MAX: u32 = 256;

pub fn alpha_grid() -> impl Iterator<Item = f64> {
    (ALPHA_MIN..=ALPHA_MAX).map(f64::from)
}

/// RDP guarantees at several orders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RdpCurve {
    points: Vec<(f64, f64)>,
}

impl RdpCurve {
    /// Orders must be strictly increasing and above 1; values nonnegative
    /// (`+inf` allowed).
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        for (i, &(a, e)) in points.iter().enumerate() {
            check_order(a)?;
            if !(e >= 0.0) {
                return Err(Error::domain(format!(
                    "RDP value at alpha={a} must be >= 0, got {e}"
                )));
            }
            if i > 0 && points[i - 1].0 >= a {
                return Err(Error::domain("RDP orders must be strictly increasing"));
            }
        }
        Ok(RdpCurve { points })
    }

    /// Evaluates `f` on the integer grid, keeping orders where it is defined.
    pub fn on_grid(mut f: impl FnMut(f64) -> Option<f64>) -> Result<Self> {
        Self::new(alpha_grid().filter_map(|a| f(a).map(|e| (a, e))).collect())
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Adaptive composition with `other`: values add at common orders; orders
    /// present in only one curve are dropped.
    pub fn compose(&self, other: &RdpCurve) -> RdpCurve {
        let points = self
            .points
            .iter()
            .filter_map(|&(a, e)| {
                other
                    .points
                    .iter()
                    .find(|&&(b, _)| b == a)
                    .map(|&(_, f)| (a, e + f))
            })
            .collect();
        RdpCurve { points }
    }

    /// `k`-fold composition with itself.
    pub fn repeat(&self, k: usize) -> RdpCurve {
        RdpCurve {
            points: self
                .points
                .iter()
                .map(|&(a, e)| (a, k as f64 * e))
                .collect(),
        }
    }

    /// Tightest `(epsilon, alpha)` after conversion to `(epsilon, delta)`-DP,
    /// or `None` for an empty curve.
    pub fn to_dp(&self, delta: f64) -> Result<Option<(f64, f64)>> {
        check_delta(delta)?;
        let mut best: Option<(f64, f64)> = None;
        for &(a, e) in &self.points {
            let eps = rdp_to_dp(a, e, delta)?;
            if best.is_none_or(|(b, _)| eps < b) {
                best = Some((eps, a));
            }
        }
        Ok(best)
    }
}
