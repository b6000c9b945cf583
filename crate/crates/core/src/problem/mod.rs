//! Finite-sum empirical risk problems `f(x) = (1/N) sum_i f(x; xi_i)`.
//!
//! A problem exposes unchecked per-sample kernels; the provided trait methods
//! wrap them with index, dimension and finiteness checks. Sums over samples
//! are always accumulated sequentially in index order so results are
//! bit-reproducible.

mod logistic;
mod quadratic;

pub use logistic::Logistic;
pub use quadratic::Quadratic;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vector::Vector;

/// Optional problem constants used by step-size rules and the accountant.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ProblemHints {
    /// Smoothness constant `L` of the average loss.
    pub lipschitz: Option<f64>,
    /// Per-sample deviation bound `sigma` with `||grad f(x) - g_i|| <= sigma`.
    pub variance: Option<f64>,
    /// Bound `G` on the norm of the full gradient.
    pub gradient_bound: Option<f64>,
    /// Known optimal value `f*`.
    pub min_value: Option<f64>,
}

impl ProblemHints {
    /// Error-signal growth rate `G' = max{0, G + sigma - c1}`.
    ///
    /// Missing `G` or `sigma` yields `+inf`, the conservative choice.
    pub fn g_prime(&self, c1: f64) -> f64 {
        match (self.gradient_bound, self.variance) {
            (Some(g), Some(s)) => (g + s - c1).max(0.0),
            _ => f64::INFINITY,
        }
    }
}

/// A differentiable finite-sum objective.
pub trait FiniteSum: Send + Sync {
    /// Number of samples `N`.
    fn len(&self) -> usize;

    /// Model dimension `d`.
    fn dim(&self) -> usize;

    /// `f(x; xi_i)` without argument checks.
    fn sample_loss_unchecked(&self, x: &[f64], i: usize) -> f64;

    /// Writes `grad f(x; xi_i)` into `out` without argument checks.
    fn sample_gradient_unchecked(&self, x: &[f64], i: usize, out: &mut [f64]);

    fn hints(&self) -> ProblemHints {
        ProblemHints::default()
    }

    /// Short human-readable descriptor.
    fn describe(&self) -> String;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn check_point(&self, x: &Vector) -> Result<()> {
        if x.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: x.dim(),
            });
        }
        Ok(())
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.len() {
            return Err(Error::IndexOutOfRange {
                index: i,
                len: self.len(),
            });
        }
        Ok(())
    }

    /// `grad f(x; xi_i)`.
    fn per_sample_gradient(&self, x: &Vector, i: usize) -> Result<Vector> {
        self.check_point(x)?;
        self.check_index(i)?;
        let mut out = vec![0.0; self.dim()];
        self.sample_gradient_unchecked(x.as_slice(), i, &mut out);
        let g = Vector::from_raw(out);
        if !g.is_finite() {
            return Err(Error::non_finite(format!("gradient of sample {i}")));
        }
        Ok(g)
    }

    fn per_sample_loss(&self, x: &Vector, i: usize) -> Result<f64> {
        self.check_point(x)?;
        self.check_index(i)?;
        let v = self.sample_loss_unchecked(x.as_slice(), i);
        if !v.is_finite() {
            return Err(Error::non_finite(format!("loss of sample {i}")));
        }
        Ok(v)
    }

    /// Gradient of the average loss; the sequential mean of all per-sample
    /// gradients.
    fn full_gradient(&self, x: &Vector) -> Result<Vector> {
        self.check_point(x)?;
        let d = self.dim();
        let mut acc = vec![0.0; d];
        let mut buf = vec![0.0; d];
        for i in 0..self.len() {
            self.sample_gradient_unchecked(x.as_slice(), i, &mut buf);
            if buf.iter().any(|v| !v.is_finite()) {
                return Err(Error::non_finite(format!("gradient of sample {i}")));
            }
            acc.iter_mut().zip(&buf).for_each(|(a, b)| *a += b);
        }
        let n = self.len() as f64;
        acc.iter_mut().for_each(|a| *a /= n);
        Ok(Vector::from_raw(acc))
    }

    /// Average loss `f(x)`.
    fn loss(&self, x: &Vector) -> Result<f64> {
        self.check_point(x)?;
        let mut acc = 0.0;
        for i in 0..self.len() {
            acc += self.sample_loss_unchecked(x.as_slice(), i);
        }
        let v = acc / self.len() as f64;
        if !v.is_finite() {
            return Err(Error::non_finite("average loss"));
        }
        Ok(v)
    }
}
