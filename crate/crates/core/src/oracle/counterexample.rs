use serde::Serialize;

use crate::error::{Error, Result};
use crate::problem::{FiniteSum, ProblemHints};

/// One-dimensional problem on which clipped SGD has a constant bias.
///
/// With `C' = ceil(C) + 1` the dataset holds `C'` samples at `-1` and one at
/// `C'`. Each sample loss is quadratic within `C'` of its sample and linear
/// outside, so per-sample gradients are `clamp(x - xi, -C', C')`. The
/// unclipped stationary point is `x = 0`.
#[derive(Debug, Clone, Serialize)]
pub struct CounterExample {
    c: f64,
    c_prime: u64,
    samples: Vec<f64>,
}

/// Builds the counterexample for threshold `c > 0`.
pub fn build_counterexample(c: f64) -> Result<CounterExample> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::config(format!(
            "counterexample threshold must be positive and finite, got {c}"
        )));
    }
    let c_prime = c.ceil() as u64 + 1;
    let mut samples = vec![-1.0; c_prime as usize];
    samples.push(c_prime as f64);
    Ok(CounterExample {
        c,
        c_prime,
        samples,
    })
}

impl CounterExample {
    pub fn threshold(&self) -> f64 {
        self.c
    }

    pub fn c_prime(&self) -> u64 {
        self.c_prime
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    /// Per-sample gradient at a scalar point.
    pub fn gradient_at(&self, x: f64, i: usize) -> f64 {
        let cp = self.c_prime as f64;
        (x - self.samples[i]).clamp(-cp, cp)
    }

    /// Per-sample loss at a scalar point.
    pub fn loss_at(&self, x: f64, i: usize) -> f64 {
        let cp = self.c_prime as f64;
        let r = x - self.samples[i];
        if r <= -cp {
            -cp * (r + cp / 2.0)
        } else if r >= cp {
            cp * (r - cp / 2.0)
        } else {
            0.5 * r * r
        }
    }

    /// Scan interval `[-2C' - 1, 2C' + 1]` for fixed-point searches.
    pub fn scan_range(&self) -> (f64, f64) {
        let w = 2.0 * self.c_prime as f64 + 1.0;
        (-w, w)
    }
}

impl FiniteSum for CounterExample {
    fn len(&self) -> usize {
        self.samples.len()
    }

    fn dim(&self) -> usize {
        1
    }

    fn sample_loss_unchecked(&self, x: &[f64], i: usize) -> f64 {
        self.loss_at(x[0], i)
    }

    fn sample_gradient_unchecked(&self, x: &[f64], i: usize, out: &mut [f64]) {
        out[0] = self.gradient_at(x[0], i);
    }

    fn hints(&self) -> ProblemHints {
        let cp = self.c_prime as f64;
        ProblemHints {
            lipschitz: Some(1.0),
            // Per-sample gradients lie in [-C', C'].
            variance: Some(2.0 * cp),
            gradient_bound: Some(cp),
            min_value: Some(
                self.loss(&crate::vector::Vector::scalar(0.0))
                    .unwrap_or(0.0),
            ),
        }
    }

    fn describe(&self) -> String {
        format!("counterexample(C={}, C'={})", self.c, self.c_prime)
    }
}
