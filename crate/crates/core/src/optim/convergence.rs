use crate::clip::ClipConfig;
use crate::error::{Error, Result};

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(format!(
            "{name} must be positive and finite, got {v}"
        )))
    }
}

/// `2 C1^2 + 3 C2^2 + d sigma1^2`, the second-moment budget of the update.
fn update_budget(clip: &ClipConfig, d: usize, sigma1: f64) -> f64 {
    2.0 * clip.c1 * clip.c1 + 3.0 * clip.c2 * clip.c2 + d as f64 * sigma1 * sigma1
}

/// Constant step size for a horizon of `t` iterations:
/// `eta = sqrt(2 (f0 - f*) / (T L (2 C1^2 + 3 C2^2 + d sigma1^2)))`.
pub fn convergence_stepsize(
    f0_minus_fstar: f64,
    lipschitz: f64,
    t: usize,
    clip: &ClipConfig,
    d: usize,
    sigma1: f64,
) -> Result<f64> {
    positive("f0 - f*", f0_minus_fstar)?;
    positive("L", lipschitz)?;
    clip.validate()?;
    if t == 0 || d == 0 {
        return Err(Error::config("T and d must be >= 1"));
    }
    if !(sigma1 >= 0.0) || !sigma1.is_finite() {
        return Err(Error::config(format!(
            "sigma1 must be finite and >= 0, got {sigma1}"
        )));
    }
    let budget = update_budget(clip, d, sigma1);
    Ok((2.0 * f0_minus_fstar / (t as f64 * lipschitz * budget)).sqrt())
}

/// Right-hand side of the weighted gradient-norm bound under the step size
/// of [`convergence_stepsize`]:
/// `2 sqrt(2 L (f0 - f*) (2 C1^2 + 3 C2^2 + d sigma1^2) / T)`.
pub fn convergence_rate_bound(
    f0_minus_fstar: f64,
    lipschitz: f64,
    t: usize,
    clip: &ClipConfig,
    d: usize,
    sigma1: f64,
) -> Result<f64> {
    // Validates the arguments with the same rules.
    convergence_stepsize(f0_minus_fstar, lipschitz, t, clip, d, sigma1)?;
    let budget = update_budget(clip, d, sigma1);
    Ok(2.0 * (2.0 * lipschitz * f0_minus_fstar * budget / t as f64).sqrt())
}

/// Whether `c2 >= 3 c1 + sigma / B`, the threshold condition of the
/// convergence bound. Informational only; the algorithm runs for any
/// `c2 >= c1`. A relative slack of `1e-12` absorbs rounding in `3 c1`.
pub fn convergence_threshold_check(clip: &ClipConfig, sigma: f64, batch: usize) -> bool {
    let b = batch.max(1) as f64;
    let need = 3.0 * clip.c1 + sigma / b;
    clip.c2 >= need * (1.0 - 1e-12)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collapses_to_one() {
        // 2 C1^2 + 3 C2^2 = 1 with C1 = C2 = 1/sqrt(5).
        let c = (0.2f64).sqrt();
        let clip = ClipConfig::single(c).unwrap();
        let eta = convergence_stepsize(1.0, 1.0, 2, &clip, 1, 0.0).unwrap();
        assert!((eta - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn doubling_horizon_divides_by_sqrt_two() {
        let clip = ClipConfig::new(0.1, 0.4).unwrap();
        let a = convergence_stepsize(10.0, 4.0, 1000, &clip, 100, 0.05).unwrap();
        let b = convergence_stepsize(10.0, 4.0, 2000, &clip, 100, 0.05).unwrap();
        assert!((a / b - 2f64.sqrt()).abs() <= 1e-12);
    }

    #[test]
    fn matches_hand_evaluation() {
        // 2 * 0.01 + 3 * 0.16 + 100 * 0.0025 = 0.75; 20 / (1000 * 4 * 0.75).
        let clip = ClipConfig::new(0.1, 0.4).unwrap();
        let eta = convergence_stepsize(10.0, 4.0, 1000, &clip, 100, 0.05).unwrap();
        assert!((eta - (20.0f64 / 3000.0).sqrt()).abs() <= 1e-12);
        let rhs = convergence_rate_bound(10.0, 4.0, 1000, &clip, 100, 0.05).unwrap();
        assert!((rhs - 2.0 * (2.0f64 * 4.0 * 10.0 * 0.75 / 1000.0).sqrt()).abs() <= 1e-12);
    }

    #[test]
    fn rejects_nonpositive_arguments() {
        let clip = ClipConfig::single(1.0).unwrap();
        assert!(convergence_stepsize(0.0, 1.0, 10, &clip, 1, 0.0).is_err());
        assert!(convergence_stepsize(1.0, -1.0, 10, &clip, 1, 0.0).is_err());
        assert!(convergence_stepsize(1.0, 1.0, 0, &clip, 1, 0.0).is_err());
        assert!(convergence_stepsize(1.0, 1.0, 10, &clip, 1, -0.1).is_err());
    }

    #[test]
    fn threshold_examples() {
        let c = |c1, c2| ClipConfig::new(c1, c2).unwrap();
        assert!(convergence_threshold_check(&c(0.1, 0.3), 0.0, 7));
        assert!(!convergence_threshold_check(&c(1.0, 3.05), 1.0, 10));
        assert!(convergence_threshold_check(&c(0.1, 0.5), 0.5, 100));
    }
}
