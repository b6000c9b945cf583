//! Norm clipping, its residual, and automatic (normalizing) clipping.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vector::Vector;

fn check_threshold(c: f64) -> Result<()> {
    if !(c > 0.0) || c.is_nan() {
        return Err(Error::config(format!(
            "clipping threshold must be positive, got {c}"
        )));
    }
    Ok(())
}

/// Thresholds for per-sample gradients (`c1`) and the error-feedback signal
/// (`c2`). Single-threshold methods read `c1` only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClipConfig {
    pub c1: f64,
    pub c2: f64,
}

impl ClipConfig {
    pub fn new(c1: f64, c2: f64) -> Result<Self> {
        check_threshold(c1)?;
        check_threshold(c2)?;
        Ok(ClipConfig { c1, c2 })
    }

    /// `c1 = c2 = c`.
    pub fn single(c: f64) -> Result<Self> {
        Self::new(c, c)
    }

    pub fn validate(&self) -> Result<()> {
        check_threshold(self.c1)?;
        check_threshold(self.c2)
    }

    /// A fixed point with zero gradient exists whenever `c2 >= c1`.
    pub fn privacy_consistent(&self) -> bool {
        self.c2 >= self.c1
    }
}

/// Result of clipping a vector: `clipped = factor * input`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClipOutcome {
    pub clipped: Vector,
    /// `min{1, c / ||v||}`, and 1 for the zero vector.
    pub factor: f64,
    pub was_clipped: bool,
}

/// `min{1, c/||v||} v`.
pub fn clip(v: &Vector, c: f64) -> Result<ClipOutcome> {
    check_threshold(c)?;
    let norm = v.norm();
    if norm <= c {
        return Ok(ClipOutcome {
            clipped: v.clone(),
            factor: 1.0,
            was_clipped: false,
        });
    }
    let factor = c / norm;
    Ok(ClipOutcome {
        clipped: v.scale(factor),
        factor,
        was_clipped: true,
    })
}

/// `v - clip(v, c)`, a non-expansive map with norm `max{0, ||v|| - c}`.
pub fn clip_residual(v: &Vector, c: f64) -> Result<Vector> {
    let out = clip(v, c)?;
    v.sub(&out.clipped)
}

/// `(c / ||v||) v`; the zero vector maps to itself.
pub fn normalize(v: &Vector, c: f64) -> Result<Vector> {
    check_threshold(c)?;
    let norm = v.norm();
    if norm == 0.0 {
        return Ok(v.clone());
    }
    Ok(v.scale(c / norm))
}

/// Lower bound on the error-feedback clip factor at iteration `t`:
/// `min{1, c2 / (c2 + t max{0, g' - c2})}`.
pub fn alpha_e_lower_bound(t: usize, c2: f64, g_prime: f64) -> f64 {
    let excess = (g_prime - c2).max(0.0);
    if excess == 0.0 || t == 0 {
        return 1.0;
    }
    (c2 / (c2 + t as f64 * excess)).min(1.0)
}
