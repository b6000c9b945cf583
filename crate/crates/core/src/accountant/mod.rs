//! Renyi-DP accounting and noise calibration.
//!
//! Every logarithm in this module is natural. Orders `alpha` range over the
//! integers `2..=256` whenever a bound is optimized.

mod feedback;
mod rdp;

pub use feedback::{
    dicesgd_epsilon_sum, dicesgd_epsilon_t, dicesgd_rdp_bound, g_tilde, sensitivity_ratio,
    EpsilonVariant,
};
pub use rdp::{
    alpha_grid, gaussian_rdp, rdp_to_dp, rdp_triangle, subsampled_gaussian_rdp, InvalidReason,
    RdpCurve, SubsampledRdp, ALPHA_MAX, ALPHA_MIN, MAX_SAMPLING_RATE,
};

use serde::{Deserialize, Serialize};

use crate::clip::ClipConfig;
use crate::error::{Error, Result};
use crate::optim::Algorithm;

/// An `(epsilon, delta)` target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyBudget {
    pub epsilon: f64,
    pub delta: f64,
}

impl PrivacyBudget {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        let b = PrivacyBudget { epsilon, delta };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(Error::domain(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::domain(format!(
                "delta must lie in (0, 1), got {}",
                self.delta
            )));
        }
        Ok(())
    }

    /// `ln(1/delta)`.
    pub fn log_inv_delta(&self) -> f64 {
        (1.0 / self.delta).ln()
    }
}

/// Whether violated calibration constraints abort or are only reported.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintMode {
    #[default]
    Enforce,
    ReportOnly,
}

/// A calibration precondition that does not hold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "constraint", rename_all = "snake_case")]
pub enum Violation {
    /// `B / N > 1/5`.
    SamplingRate { rate: f64 },
    /// `C2 > C / B`.
    FeedbackThreshold { c2: f64, limit: f64 },
    /// `C1 > C2`.
    ThresholdOrder { c1: f64, c2: f64 },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::SamplingRate { rate } => {
                write!(f, "sampling rate B/N = {rate} exceeds {MAX_SAMPLING_RATE}")
            }
            Violation::FeedbackThreshold { c2, limit } => {
                write!(f, "C2 = {c2} exceeds C/B = {limit}")
            }
            Violation::ThresholdOrder { c1, c2 } => write!(f, "C1 = {c1} exceeds C2 = {c2}"),
        }
    }
}

/// Problem-size and threshold inputs to the calibration routines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationInputs {
    /// Number of iterations `T`.
    pub horizon: usize,
    /// Dataset size `N`.
    pub n: usize,
    /// Nominal batch size `B`.
    pub batch: usize,
    pub clip: ClipConfig,
    /// Single threshold `C` entering `G~`, and the sensitivity for DPSGD-GC.
    pub c: f64,
    /// Error-signal growth rate `G'`; `None` means `+inf`.
    #[serde(default)]
    pub g_prime: Option<f64>,
    #[serde(default)]
    pub constraints: ConstraintMode,
}

impl CalibrationInputs {
    pub fn g_prime(&self) -> f64 {
        self.g_prime.unwrap_or(f64::INFINITY)
    }

    pub fn sampling_rate(&self) -> f64 {
        self.batch as f64 / self.n as f64
    }

    fn check_sizes(&self) -> Result<()> {
        if self.horizon == 0 || self.n == 0 || self.batch == 0 {
            return Err(Error::Calibration("T, N and B must be >= 1".into()));
        }
        if self.batch > self.n {
            return Err(Error::Calibration(format!(
                "batch size {} exceeds dataset size {}",
                self.batch, self.n
            )));
        }
        if !(self.c > 0.0) || !self.c.is_finite() {
            return Err(Error::Calibration(format!(
                "C must be positive, got {}",
                self.c
            )));
        }
        if let Some(g) = self.g_prime {
            if !(g >= 0.0) {
                return Err(Error::Calibration(format!("G' must be >= 0, got {g}")));
            }
        }
        self.clip
            .validate()
            .map_err(|e| Error::Calibration(e.to_string()))
    }

    /// Every violated precondition of the error-feedback calibration.
    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let rate = self.sampling_rate();
        if rate > MAX_SAMPLING_RATE {
            out.push(Violation::SamplingRate { rate });
        }
        if self.clip.c1 > self.clip.c2 {
            out.push(Violation::ThresholdOrder {
                c1: self.clip.c1,
                c2: self.clip.c2,
            });
        }
        let limit = self.c / self.batch as f64;
        if self.clip.c2 > limit * (1.0 + 1e-12) {
            out.push(Violation::FeedbackThreshold {
                c2: self.clip.c2,
                limit,
            });
        }
        out
    }

    fn admit(&self, relevant: impl Fn(&Violation) -> bool) -> Result<Vec<Violation>> {
        self.check_sizes()?;
        let found: Vec<Violation> = self.violations().into_iter().filter(relevant).collect();
        if self.constraints == ConstraintMode::Enforce {
            if let Some(v) = found.first() {
                return Err(Error::Calibration(v.to_string()));
            }
        }
        Ok(found)
    }
}

/// Result of calibrating the noise for one algorithm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub algorithm: Algorithm,
    pub sigma1: f64,
    /// Order at which `epsilon_check` is attained.
    pub alpha_star: Option<f64>,
    /// Epsilon certified by the bound used for calibration, at `sigma1`.
    pub epsilon_check: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g_tilde: Option<f64>,
    /// Preconditions that failed under [`ConstraintMode::ReportOnly`].
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub violations: Vec<Violation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Noise for DiceSGD: `sigma1 = sqrt(32 T G~ ln(1/delta) / (N^2 eps^2))` with
/// `G~ = C1^2 + 2 min{C^2, G'^2}`.
pub fn calibrate_dicesgd(inputs: &CalibrationInputs, budget: &PrivacyBudget) -> Result<f64> {
    budget.validate()?;
    inputs.admit(|_| true)?;
    Ok(dicesgd_sigma(inputs, budget))
}

fn dicesgd_sigma(inputs: &CalibrationInputs, budget: &PrivacyBudget) -> f64 {
    let gt = g_tilde(inputs.clip.c1, inputs.c, inputs.g_prime());
    let n = inputs.n as f64;
    (32.0 * inputs.horizon as f64 * gt * budget.log_inv_delta()
        / (n * n * budget.epsilon * budget.epsilon))
        .sqrt()
}

/// Noise for automatic DiceSGD: `sqrt(96 T ln(1/delta)) C / (N eps)`.
pub fn calibrate_automatic(
    horizon: usize,
    n: usize,
    epsilon: f64,
    delta: f64,
    c: f64,
) -> Result<f64> {
    let budget = PrivacyBudget::new(epsilon, delta)?;
    if horizon == 0 || n == 0 {
        return Err(Error::domain("T and N must be >= 1"));
    }
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::domain(format!("C must be positive, got {c}")));
    }
    Ok((96.0 * horizon as f64 * budget.log_inv_delta()).sqrt() * c / (n as f64 * epsilon))
}

/// Composed RDP curve of `T` subsampled Gaussian steps with rate `p`,
/// sensitivity `c`, and noise `sigma`, restricted to valid orders.
pub fn subsampled_curve(horizon: usize, p: f64, c: f64, sigma: f64) -> RdpCurve {
    let points = alpha_grid()
        .filter_map(|a| {
            subsampled_gaussian_rdp(p, c, sigma, a)
                .value()
                .map(|e| (a, horizon as f64 * e))
        })
        .collect();
    RdpCurve::new(points).expect("grid orders are increasing and values nonnegative")
}

const SEARCH_REL_TOL: f64 = 1e-6;
const SEARCH_UPPER: f64 = 1e6;

/// Noise for DPSGD-GC: the smallest `sigma1` (to `1e-6` relative) such that
/// `T` subsampled Gaussian steps with rate `B/N` and sensitivity `C` convert
/// to at most `epsilon` at the best valid grid order. The search covers
/// `(4C, 1e6 C]`.
pub fn calibrate_dpsgd_gc(inputs: &CalibrationInputs, budget: &PrivacyBudget) -> Result<f64> {
    budget.validate()?;
    inputs.check_sizes()?;
    let p = inputs.sampling_rate();
    if p > MAX_SAMPLING_RATE {
        return Err(Error::Calibration(
            Violation::SamplingRate { rate: p }.to_string(),
        ));
    }
    let c = inputs.c;
    let feasible = |sigma: f64| -> bool {
        matches!(
            subsampled_curve(inputs.horizon, p, c, sigma).to_dp(budget.delta),
            Ok(Some((eps, _))) if eps <= budget.epsilon
        )
    };
    let mut lo = 4.0 * c;
    let mut hi = SEARCH_UPPER * c;
    if !feasible(hi) {
        return Err(Error::Calibration(format!(
            "no valid order reaches epsilon = {} for sigma1 <= {hi}",
            budget.epsilon
        )));
    }
    while (hi - lo) > SEARCH_REL_TOL * hi {
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Epsilon certified by the closed-form error-feedback bound at `sigma1`,
/// with the order attaining it.
pub fn dicesgd_bound_epsilon(
    inputs: &CalibrationInputs,
    sigma1: f64,
    delta: f64,
) -> Result<Option<(f64, f64)>> {
    let curve = RdpCurve::on_grid(|a| {
        dicesgd_rdp_bound(
            inputs.horizon,
            sigma1,
            inputs.n,
            inputs.clip.c1,
            inputs.c,
            inputs.g_prime(),
            a,
        )
        .ok()
    })?;
    curve.to_dp(delta)
}

/// Epsilon from summing the per-iteration costs over `T` iterations at
/// `sigma1`, with the order attaining it. Infinite when `G'` is unbounded.
pub fn dicesgd_composed_epsilon(
    inputs: &CalibrationInputs,
    sigma1: f64,
    delta: f64,
    variant: EpsilonVariant,
) -> Result<Option<(f64, f64)>> {
    let mut points = Vec::new();
    for a in alpha_grid() {
        let total = dicesgd_epsilon_sum(
            inputs.horizon,
            sigma1,
            inputs.n,
            &inputs.clip,
            inputs.g_prime(),
            a,
            variant,
        )?;
        points.push((a, total));
    }
    RdpCurve::new(points)?.to_dp(delta)
}

/// Calibrates `algorithm` and records how the result was checked.
///
/// The Adam variant reuses the DiceSGD noise; its record carries a note that
/// the guarantee follows the DiceSGD analysis.
pub fn calibrate(
    algorithm: Algorithm,
    inputs: &CalibrationInputs,
    budget: &PrivacyBudget,
) -> Result<Calibration> {
    budget.validate()?;
    match algorithm {
        Algorithm::DpsgdGc => {
            let sigma1 = calibrate_dpsgd_gc(inputs, budget)?;
            let check = subsampled_curve(inputs.horizon, inputs.sampling_rate(), inputs.c, sigma1)
                .to_dp(budget.delta)?;
            Ok(Calibration {
                algorithm,
                sigma1,
                alpha_star: check.map(|c| c.1),
                epsilon_check: check.map(|c| c.0),
                g_tilde: None,
                violations: Vec::new(),
                note: None,
            })
        }
        Algorithm::DiceSgd | Algorithm::AdamDiceSgd => {
            let violations = inputs.admit(|_| true)?;
            let sigma1 = dicesgd_sigma(inputs, budget);
            let check = dicesgd_bound_epsilon(inputs, sigma1, budget.delta)?;
            Ok(Calibration {
                algorithm,
                sigma1,
                alpha_star: check.map(|c| c.1),
                epsilon_check: check.map(|c| c.0),
                g_tilde: Some(g_tilde(inputs.clip.c1, inputs.c, inputs.g_prime())),
                violations,
                note: (algorithm == Algorithm::AdamDiceSgd)
                    .then(|| "guarantee per the DiceSGD analysis".to_string()),
            })
        }
        Algorithm::Automatic => {
            let violations = inputs.admit(|v| matches!(v, Violation::SamplingRate { .. }))?;
            let sigma1 = calibrate_automatic(
                inputs.horizon,
                inputs.n,
                budget.epsilon,
                budget.delta,
                inputs.c,
            )?;
            let unit = CalibrationInputs {
                clip: ClipConfig::single(inputs.c)?,
                g_prime: None,
                ..inputs.clone()
            };
            let check = dicesgd_bound_epsilon(&unit, sigma1, budget.delta)?;
            Ok(Calibration {
                algorithm,
                sigma1,
                alpha_star: check.map(|c| c.1),
                epsilon_check: check.map(|c| c.0),
                g_tilde: Some(3.0 * inputs.c * inputs.c),
                violations,
                note: None,
            })
        }
    }
}
