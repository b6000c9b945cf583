use std::path::Path;

use crate::error::{Error, Result};
use crate::noise::NoiseSource;
use crate::problem::{FiniteSum, ProblemHints};
use crate::vector::Vector;

/// Binary logistic regression without intercept,
/// `f(w; (x, y)) = ln(1 + exp(-y w.x))` with `y in {-1, +1}`.
#[derive(Debug, Clone)]
pub struct Logistic {
    features: Vec<Vector>,
    labels: Vec<f64>,
}

/// `ln(1 + exp(z))` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// `1 / (1 + exp(-z))` without overflow.
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn parse_label(raw: &str, row: usize) -> Result<f64> {
    let v: f64 = raw
        .trim()
        .parse()
        .map_err(|_| Error::Data(format!("row {row}: label {raw:?} is not numeric")))?;
    if v == 1.0 {
        Ok(1.0)
    } else if v == 0.0 || v == -1.0 {
        Ok(-1.0)
    } else {
        Err(Error::Data(format!(
            "row {row}: label must be 0/1 or -1/+1, got {v}"
        )))
    }
}

impl Logistic {
    /// Labels must be `+1` or `-1`.
    pub fn new(features: Vec<Vector>, labels: Vec<f64>) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::config("logistic problem needs at least one sample"));
        }
        if features.len() != labels.len() {
            return Err(Error::Data(format!(
                "{} feature rows but {} labels",
                features.len(),
                labels.len()
            )));
        }
        if labels.iter().any(|&y| y != 1.0 && y != -1.0) {
            return Err(Error::Data("labels must be -1 or +1".into()));
        }
        let d = features[0].dim();
        if let Some(bad) = features.iter().find(|f| f.dim() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: bad.dim(),
            });
        }
        Ok(Logistic { features, labels })
    }

    /// Parses rows of `label,feature_1,...,feature_d`. Labels may be `0/1`
    /// or `-1/+1`. A first row whose label field is not numeric is treated
    /// as a header.
    pub fn from_csv_reader<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for (row, record) in rdr.records().enumerate() {
            let record = record.map_err(|e| Error::Data(format!("row {row}: {e}")))?;
            let mut fields = record.iter();
            let Some(label) = fields.next() else { continue };
            if row == 0 && label.parse::<f64>().is_err() {
                continue;
            }
            labels.push(parse_label(label, row)?);
            let values = fields
                .map(|f| {
                    f.parse::<f64>().map_err(|_| {
                        Error::Data(format!("row {row}: feature {f:?} is not numeric"))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            features.push(
                Vector::new(values)
                    .map_err(|_| Error::Data(format!("row {row}: non-finite feature")))?,
            );
        }
        Self::new(features, labels)
    }

    pub fn from_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path)
            .map_err(|e| Error::Data(format!("cannot open {}: {e}", path.display())))?;
        Self::from_csv_reader(std::io::BufReader::new(file))
    }

    /// Two Gaussian classes in `R^d` with means `+-separation * 1` and unit
    /// covariance, labels balanced in expectation.
    pub fn two_gaussians(dim: usize, n: usize, separation: f64, seed: u64) -> Result<Self> {
        if dim == 0 || n == 0 {
            return Err(Error::config(
                "logistic generator needs dim >= 1 and n >= 1",
            ));
        }
        let mut noise = NoiseSource::new(seed, 0);
        let mut features = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let y = if noise.standard_normal() >= 0.0 {
                1.0
            } else {
                -1.0
            };
            let z = noise.gaussian_vector(dim, 1.0)?;
            let x: Vec<f64> = z.as_slice().iter().map(|v| v + y * separation).collect();
            features.push(Vector::new(x)?);
            labels.push(y);
        }
        Self::new(features, labels)
    }

    pub fn features(&self) -> &[Vector] {
        &self.features
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    fn margin(&self, w: &[f64], i: usize) -> f64 {
        let x = self.features[i].as_slice();
        self.labels[i] * w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
    }
}

impl FiniteSum for Logistic {
    fn len(&self) -> usize {
        self.features.len()
    }

    fn dim(&self) -> usize {
        self.features[0].dim()
    }

    fn sample_loss_unchecked(&self, w: &[f64], i: usize) -> f64 {
        softplus(-self.margin(w, i))
    }

    fn sample_gradient_unchecked(&self, w: &[f64], i: usize, out: &mut [f64]) {
        let coef = -self.labels[i] * sigmoid(-self.margin(w, i));
        for (o, x) in out.iter_mut().zip(self.features[i].as_slice()) {
            *o = coef * x;
        }
    }

    fn hints(&self) -> ProblemHints {
        let n = self.len() as f64;
        let norms: Vec<f64> = self.features.iter().map(Vector::norm).collect();
        let mean_sq = norms.iter().map(|v| v * v).sum::<f64>() / n;
        let mean_norm = norms.iter().sum::<f64>() / n;
        let max_norm = norms.iter().cloned().fold(0.0, f64::max);
        ProblemHints {
            lipschitz: Some(0.25 * mean_sq),
            variance: Some(max_norm + mean_norm),
            gradient_bound: Some(mean_norm),
            min_value: None,
        }
    }

    fn describe(&self) -> String {
        format!("logistic(d={}, n={})", self.dim(), self.len())
    }
}
