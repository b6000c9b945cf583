//! Dense real vectors with dimension-checked arithmetic.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A dense vector in `R^d`.
///
/// Binary operations check dimensions and return [`Error::DimensionMismatch`]
/// on disagreement. The in-place helpers (`axpy`, `scale_mut`) are used on the
/// hot path of the optimizers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Vector(Vec<f64>);

impl Vector {
    /// Wraps `values`, rejecting NaN and infinite entries.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::non_finite(format!("vector entry {pos}")));
        }
        Ok(Vector(values))
    }

    pub fn zeros(dim: usize) -> Self {
        Vector(vec![0.0; dim])
    }

    pub fn filled(dim: usize, value: f64) -> Self {
        Vector(vec![value; dim])
    }

    pub fn scalar(value: f64) -> Self {
        Vector(vec![value])
    }

    /// Wraps values without the finiteness check. Callers must validate
    /// before the vector escapes the library.
    pub(crate) fn from_raw(values: Vec<f64>) -> Self {
        Vector(values)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0.0)
    }

    fn check_dim(&self, other: &Vector) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: other.dim(),
            });
        }
        Ok(())
    }

    pub fn dot(&self, other: &Vector) -> Result<f64> {
        self.check_dim(other)?;
        Ok(self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum())
    }

    pub fn norm_squared(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum()
    }

    /// Euclidean norm.
    pub fn norm(&self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn add(&self, other: &Vector) -> Result<Vector> {
        self.check_dim(other)?;
        Ok(Vector(
            self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect(),
        ))
    }

    pub fn sub(&self, other: &Vector) -> Result<Vector> {
        self.check_dim(other)?;
        Ok(Vector(
            self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect(),
        ))
    }

    pub fn scale(&self, factor: f64) -> Vector {
        Vector(self.0.iter().map(|v| v * factor).collect())
    }

    pub fn scale_mut(&mut self, factor: f64) {
        self.0.iter_mut().for_each(|v| *v *= factor);
    }

    /// `self += factor * other`.
    pub fn axpy(&mut self, factor: f64, other: &Vector) -> Result<()> {
        self.check_dim(other)?;
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += factor * b;
        }
        Ok(())
    }

    /// Largest coordinate-wise absolute difference.
    pub fn max_abs_diff(&self, other: &Vector) -> Result<f64> {
        self.check_dim(other)?;
        Ok(self
            .0
            .iter()
            .zip(&other.0)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }

    /// Euclidean distance.
    pub fn distance(&self, other: &Vector) -> Result<f64> {
        Ok(self.sub(other)?.norm())
    }

    /// Arithmetic mean of `vectors`, accumulated sequentially in slice order.
    pub fn mean_of(vectors: &[Vector]) -> Result<Vector> {
        let first = vectors
            .first()
            .ok_or_else(|| Error::Data("mean of an empty vector list".into()))?;
        let mut acc = Vector::zeros(first.dim());
        for v in vectors {
            acc.axpy(1.0, v)?;
        }
        acc.scale_mut(1.0 / vectors.len() as f64);
        Ok(acc)
    }
}

impl std::ops::Index<usize> for Vector {
    type Output = f64;

    fn index(&self, index: usize) -> &f64 {
        &self.0[index]
    }
}

impl TryFrom<Vec<f64>> for Vector {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Vector::new(values)
    }
}
