//! Experiment harness for clipped error-feedback SGD.
//!
//! A JSON [`ExperimentConfig`] names a problem, an algorithm, and either a
//! hand-set noise level or a privacy budget. Runs produce a [`RunTrace`]
//! persisted as CSV with a JSON sidecar; [`weights`] turns the recorded clip
//! factors into the iterate weights of the convergence statistic.

// Validation uses `!(x > 0.0)` so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod experiment;
pub mod trace;
pub mod weights;

pub use config::{
    CalibrationOptions, CalibrationRecord, ExperimentConfig, GPrimeSource, InitialPoint,
    ProblemSpec, SweepSpec,
};
pub use error::{HarnessError, Result};
pub use experiment::{
    compare_runs, effective_stepsize_sweep, run_experiment, Comparison, SweepCell,
};
pub use trace::{RunMetadata, RunTrace};
pub use weights::{iterate_weights, weighted_grad_summary, WeightedSummary};
