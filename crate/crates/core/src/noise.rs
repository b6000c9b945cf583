//! Seeded Gaussian noise.
//!
//! Deviates come from the Marsaglia polar method driven by a ChaCha20 stream.
//! Uniforms are formed from the top 53 bits of each 64-bit word, so the
//! sequence depends only on `(seed, stream_id)` and is identical on every
//! platform.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::vector::Vector;

/// Stream id reserved for privacy noise.
pub const NOISE_STREAM: u64 = 1;

/// Uniform on `[0, 1)` with 53 bits of precision.
pub(crate) fn unit_uniform(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Source of i.i.d. standard normal deviates.
#[derive(Debug, Clone)]
pub struct NoiseSource {
    rng: ChaCha20Rng,
    spare: Option<f64>,
    seed: u64,
    stream_id: u64,
}

impl NoiseSource {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        NoiseSource {
            rng,
            spare: None,
            seed,
            stream_id,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// One standard normal deviate.
    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        loop {
            let u = 2.0 * unit_uniform(&mut self.rng) - 1.0;
            let v = 2.0 * unit_uniform(&mut self.rng) - 1.0;
            let s = u * u + v * v;
            if s > 0.0 && s < 1.0 {
                let factor = (-2.0 * s.ln() / s).sqrt();
                self.spare = Some(v * factor);
                return u * factor;
            }
        }
    }

    /// `d` i.i.d. `N(0, sigma^2)` entries. `sigma = 0` returns the exact zero
    /// vector without consuming randomness.
    pub fn gaussian_vector(&mut self, d: usize, sigma: f64) -> Result<Vector> {
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(Error::config(format!(
                "noise standard deviation must be finite and >= 0, got {sigma}"
            )));
        }
        if sigma == 0.0 {
            return Ok(Vector::zeros(d));
        }
        Ok(Vector::from_raw(
            (0..d).map(|_| sigma * self.standard_normal()).collect(),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_sigma_is_exact_zero() {
        let mut n = NoiseSource::new(3, NOISE_STREAM);
        assert_eq!(n.gaussian_vector(5, 0.0).unwrap().as_slice(), &[0.0; 5]);
    }

    #[test]
    fn negative_sigma_is_config_error() {
        let mut n = NoiseSource::new(3, NOISE_STREAM);
        assert!(matches!(n.gaussian_vector(2, -1.0), Err(Error::Config(_))));
        assert!(n.gaussian_vector(2, f64::NAN).is_err());
    }

    #[test]
    fn moments_of_a_million_draws() {
        let mut n = NoiseSource::new(20240601, NOISE_STREAM);
        let count = 1_000_000;
        let draws: Vec<f64> = (0..count).map(|_| n.standard_normal()).collect();
        let mean = draws.iter().sum::<f64>() / count as f64;
        let var = draws.iter().map(|z| (z - mean).powi(2)).sum::<f64>() / (count - 1) as f64;
        assert!(mean.abs() <= 4e-3, "mean {mean}");
        assert!((var - 1.0).abs() <= 1e-2, "variance {var}");
    }

    #[test]
    fn scaled_vector_variance() {
        let mut n = NoiseSource::new(11, NOISE_STREAM);
        let v = n.gaussian_vector(1_000_000, 1.0).unwrap();
        let var = v.norm_squared() / v.dim() as f64;
        assert!((0.99..=1.01).contains(&var), "variance {var}");
    }

    #[test]
    fn determinism_and_stream_separation() {
        let mut a = NoiseSource::new(7, NOISE_STREAM);
        let mut b = NoiseSource::new(7, NOISE_STREAM);
        let a1 = a.gaussian_vector(8, 1.0).unwrap();
        let a2 = a.gaussian_vector(8, 1.0).unwrap();
        assert_ne!(a1, a2);
        assert_eq!(a1, b.gaussian_vector(8, 1.0).unwrap());
        assert_eq!(a2, b.gaussian_vector(8, 1.0).unwrap());

        let mut other = NoiseSource::new(7, NOISE_STREAM + 1);
        assert_ne!(a1, other.gaussian_vector(8, 1.0).unwrap());
    }

    #[test]
    fn pinned_first_deviates() {
        // Freezes the algorithm: any change to the uniform construction or the
        // polar transform changes these bits.
        let mut a = NoiseSource::new(0, 0);
        let first: Vec<u64> = (0..4).map(|_| a.standard_normal().to_bits()).collect();
        assert_eq!(
            first,
            [
                0x3fd449b4abb7e26c,
                0xbfd1aae9a0e2e6e4,
                0x3fd7cd398a3fa264,
                0xbfcf9daa902d5744
            ]
        );
    }

    #[test]
    fn polar_transform_from_raw_words() {
        // Rebuilds the first pair from the underlying ChaCha words.
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        rng.set_stream(3);
        let expect = loop {
            let u = 2.0 * ((rng.next_u64() >> 11) as f64 / 9007199254740992.0) - 1.0;
            let v = 2.0 * ((rng.next_u64() >> 11) as f64 / 9007199254740992.0) - 1.0;
            let s = u * u + v * v;
            if s > 0.0 && s < 1.0 {
                let f = (-2.0 * s.ln() / s).sqrt();
                break (u * f, v * f);
            }
        };
        let mut n = NoiseSource::new(5, 3);
        assert_eq!((n.standard_normal(), n.standard_normal()), expect);
    }
}
