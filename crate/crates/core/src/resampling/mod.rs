//! Seed-deterministic resampling: label-permutation null tests and the
//! percentile bootstrap. Every replicate draws from its own counter-derived
//! substream, so results are bit-identical regardless of how replicates are
//! scheduled across threads.

pub mod bootstrap;
pub mod permutation;
mod rng;

pub use bootstrap::{bootstrap_percentile, BootstrapResult, Estimand};
pub use permutation::{permutation_null_test, PermutationResult, StatisticName};
pub use rng::substream_rng;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ResampleError {
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("{n_failed} of {n_total} permutation replicates failed to converge (> 5%)")]
    TooManyFailures { n_failed: usize, n_total: usize },
    #[error(transparent)]
    Fit(#[from] crate::inference::FitError),
}
