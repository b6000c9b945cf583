//! Clipped error-feedback SGD and its differentially private baselines.
//!
//! The crate is organized bottom-up:
//!
//! * [`vector`], [`problem`], [`sampling`], [`noise`]: dense arithmetic,
//!   finite-sum objectives, minibatch selection, and seeded Gaussian noise.
//! * [`clip`]: norm clipping, its residual, and normalization.
//! * [`optim`]: DPSGD-GC, DiceSGD, its Adam variant, and automatic DiceSGD.
//! * [`accountant`]: Renyi-DP primitives and noise calibration.
//! * [`oracle`]: brute-force references used to validate the above.

// Validation uses `!(x > 0.0)` so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod accountant;
pub mod clip;
pub mod error;
pub mod noise;
pub mod optim;
pub mod oracle;
pub mod problem;
pub mod sampling;
pub mod vector;

pub use clip::{clip as clip_vector, clip_residual, normalize, ClipConfig, ClipOutcome};
pub use error::{Error, Result};
pub use noise::NoiseSource;
pub use optim::{Algorithm, HyperParams, OptimizerState, StepReport};
pub use problem::{FiniteSum, Logistic, ProblemHints, Quadratic};
pub use sampling::{MinibatchSampler, SamplingMode};
pub use vector::Vector;
