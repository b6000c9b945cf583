use crate::error::{Error, Result};
use crate::noise::NoiseSource;
use crate::problem::{FiniteSum, ProblemHints};
use crate::vector::Vector;

/// Diagonal quadratic `f(x; xi) = 1/2 sum_j a_j (x_j - xi_j)^2`.
///
/// With unit curvature this is `1/2 ||x - xi||^2`. The minimizer of the
/// average is the sample mean and every constant in [`ProblemHints`] except
/// the gradient bound is known in closed form.
#[derive(Debug, Clone)]
pub struct Quadratic {
    curvature: Vec<f64>,
    samples: Vec<Vector>,
    mean: Vector,
}

impl Quadratic {
    pub fn new(curvature: Vec<f64>, samples: Vec<Vector>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::config("quadratic problem needs at least one sample"));
        }
        if curvature.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
            return Err(Error::config("curvatures must be positive and finite"));
        }
        let d = curvature.len();
        if let Some(bad) = samples.iter().find(|s| s.dim() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: bad.dim(),
            });
        }
        let mean = Vector::mean_of(&samples)?;
        Ok(Quadratic {
            curvature,
            samples,
            mean,
        })
    }

    /// Unit curvature, `f(x; xi) = 1/2 ||x - xi||^2`.
    pub fn isotropic(samples: Vec<Vector>) -> Result<Self> {
        let d = samples.first().map(Vector::dim).unwrap_or(0);
        Self::new(vec![1.0; d], samples)
    }

    /// Seeded synthetic instance: curvatures evenly spaced in
    /// `[1, condition]` and samples `center + spread * z`, `z ~ N(0, I)`.
    pub fn synthetic(
        dim: usize,
        n: usize,
        condition: f64,
        spread: f64,
        center: f64,
        seed: u64,
    ) -> Result<Self> {
        if dim == 0 || n == 0 {
            return Err(Error::config("quadratic needs dim >= 1 and n >= 1"));
        }
        if !(condition >= 1.0) {
            return Err(Error::config("condition number must be >= 1"));
        }
        let curvature: Vec<f64> = (0..dim)
            .map(|j| {
                if dim == 1 {
                    1.0
                } else {
                    1.0 + (condition - 1.0) * j as f64 / (dim - 1) as f64
                }
            })
            .collect();
        let mut noise = NoiseSource::new(seed, 0);
        let samples = (0..n)
            .map(|_| {
                let z = noise.gaussian_vector(dim, spread.abs())?;
                Vector::new(z.as_slice().iter().map(|v| center + v).collect())
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(curvature, samples)
    }

    pub fn minimizer(&self) -> &Vector {
        &self.mean
    }

    pub fn curvature(&self) -> &[f64] {
        &self.curvature
    }

    pub fn samples(&self) -> &[Vector] {
        &self.samples
    }

    fn optimal_value(&self) -> f64 {
        let total: f64 = (0..self.samples.len())
            .map(|i| self.sample_loss_unchecked(self.mean.as_slice(), i))
            .sum();
        total / self.samples.len() as f64
    }

    fn max_deviation(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| {
                s.as_slice()
                    .iter()
                    .zip(self.mean.as_slice())
                    .zip(&self.curvature)
                    .map(|((x, m), a)| (a * (x - m)).powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max)
    }
}

impl FiniteSum for Quadratic {
    fn len(&self) -> usize {
        self.samples.len()
    }

    fn dim(&self) -> usize {
        self.curvature.len()
    }

    fn sample_loss_unchecked(&self, x: &[f64], i: usize) -> f64 {
        let xi = self.samples[i].as_slice();
        0.5 * x
            .iter()
            .zip(xi)
            .zip(&self.curvature)
            .map(|((x, s), a)| a * (x - s).powi(2))
            .sum::<f64>()
    }

    fn sample_gradient_unchecked(&self, x: &[f64], i: usize, out: &mut [f64]) {
        let xi = self.samples[i].as_slice();
        for (j, o) in out.iter_mut().enumerate() {
            *o = self.curvature[j] * (x[j] - xi[j]);
        }
    }

    fn hints(&self) -> ProblemHints {
        ProblemHints {
            lipschitz: Some(self.curvature.iter().cloned().fold(0.0, f64::max)),
            // ||grad f(x) - g_i|| = ||A (xi_i - mean)|| is independent of x.
            variance: Some(self.max_deviation()),
            gradient_bound: None,
            min_value: Some(self.optimal_value()),
        }
    }

    fn describe(&self) -> String {
        format!("quadratic(d={}, n={})", self.dim(), self.len())
    }
}
