//! Brute-force references for the optimizers.
//!
//! Nothing here calls into [`crate::optim`] or [`crate::clip`] except where
//! the optimizer under test is invoked for comparison; the reference
//! arithmetic is written out separately so it cannot share a bug.

mod counterexample;
mod equivalence;
mod fixed_point;

pub use counterexample::{build_counterexample, CounterExample};
pub use equivalence::{
    small_instance_equivalence, EquivalenceReport, Fault, MAX_EQUIVALENCE_HORIZON,
};
pub use fixed_point::{
    clipped_fixed_point, dicesgd_fixed_point_check, FixedPoint, FixedPointReport,
    FixedPointResiduals,
};

/// `min{1, c/|v|} v` in one dimension, local to the oracle.
pub(crate) fn clip_scalar(v: f64, c: f64) -> f64 {
    if c.is_infinite() || v.abs() <= c {
        v
    } else {
        c * v.signum()
    }
}

/// `min{1, c/||v||} v`, local to the oracle.
pub(crate) fn clip_slice(v: &[f64], c: f64) -> Vec<f64> {
    let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if c.is_infinite() || norm <= c {
        v.to_vec()
    } else {
        v.iter().map(|a| a * (c / norm)).collect()
    }
}
