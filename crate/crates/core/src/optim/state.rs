use serde::{Deserialize, Serialize};

use crate::vector::Vector;

/// Iterate, error-feedback signal, Adam moments, and iteration counter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub x: Vector,
    pub e: Vector,
    pub m1: Vector,
    pub m2: Vector,
    pub t: usize,
}

impl OptimizerState {
    /// Starts at `x0` with `e`, `m1`, `m2` zero and `t = 0`.
    pub fn new(x0: Vector) -> Self {
        let d = x0.dim();
        OptimizerState {
            x: x0,
            e: Vector::zeros(d),
            m1: Vector::zeros(d),
            m2: Vector::zeros(d),
            t: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.x.dim()
    }
}

/// Diagnostics for one iteration.
///
/// `loss` and `grad_norm` are full-data values at the iterate the step
/// started from; `alpha_e` and `e_norm` describe the error signal before the
/// update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub t: usize,
    pub loss: f64,
    pub grad_norm: f64,
    pub alpha_e: f64,
    pub e_norm: f64,
    /// Share of the minibatch whose gradient exceeded the threshold; 0 for an
    /// empty batch.
    pub clip_fraction: f64,
    pub realized_batch: usize,
}
