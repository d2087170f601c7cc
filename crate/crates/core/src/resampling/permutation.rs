//! Label-permutation null test for the DI -> corrective coupling.
//!
//! Corrective labels are shuffled uniformly across all comment rows while
//! every post keeps its DI, and two statistics are recomputed per
//! replicate: the simple logistic slope and the binned-probability slope.
//! Two-sided p-values use the add-one convention `(1 + r) / (B + 1)`.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::Serialize;

use crate::inference::binned::{assign_bins, bin_counts, binned_slope_from_counts, BinAssignment};
use crate::inference::logistic::fit_logistic;
use crate::inference::sample::RegressionSample;

use super::rng::substream_rng;
use super::ResampleError;

const RNG_LABEL: &str = "permtest";
const MAX_FAILURE_SHARE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StatisticName {
    SimpleSlope,
    BinnedSlope,
}

#[derive(Debug, Clone, Serialize)]
pub struct PermutationResult {
    pub statistic_name: StatisticName,
    pub observed: f64,
    pub null_draws: Vec<f64>,
    pub p_two_sided: f64,
    /// Replicates dropped because the logistic refit failed to converge.
    pub n_excluded: usize,
}

fn p_value(observed: f64, null_draws: &[f64]) -> f64 {
    let r = null_draws
        .iter()
        .filter(|d| d.abs() >= observed.abs())
        .count();
    (1.0 + r as f64) / (null_draws.len() as f64 + 1.0)
}

struct Replicate {
    simple: Option<f64>,
    binned: f64,
}

fn one_replicate(
    z: &[f64],
    y: &[bool],
    assignment: &BinAssignment,
    seed: u64,
    index: u64,
) -> Replicate {
    let mut rng = substream_rng(seed, RNG_LABEL, index);
    let mut permuted: Vec<bool> = y.to_vec();
    permuted.shuffle(&mut rng);
    let simple = fit_logistic(z, &permuted).ok().map(|f| f.beta);
    let counts = bin_counts(assignment, &permuted);
    let binned = binned_slope_from_counts(&counts).unwrap_or(f64::NAN);
    Replicate { simple, binned }
}

/// Run the permutation null test with `b` replicates. Returns the
/// simple-slope and binned-slope results, in that order.
pub fn permutation_null_test(
    sample: &RegressionSample,
    b: usize,
    seed: u64,
    q_bins: usize,
) -> Result<(PermutationResult, PermutationResult), ResampleError> {
    if b == 0 {
        return Err(ResampleError::DegenerateInput(
            "permutation test needs B >= 1".into(),
        ));
    }
    let z = sample.z_values();
    let y = sample.y_values();
    let observed_simple = fit_logistic(&z, &y)?.beta;
    let assignment = assign_bins(sample, q_bins)?;
    let observed_binned = binned_slope_from_counts(&bin_counts(&assignment, &y))?;

    let replicates: Vec<Replicate> = (0..b as u64)
        .into_par_iter()
        .map(|i| one_replicate(&z, &y, &assignment, seed, i))
        .collect();

    let n_excluded = replicates.iter().filter(|r| r.simple.is_none()).count();
    if (n_excluded as f64) > MAX_FAILURE_SHARE * b as f64 {
        return Err(ResampleError::TooManyFailures {
            n_failed: n_excluded,
            n_total: b,
        });
    }
    let simple_draws: Vec<f64> = replicates.iter().filter_map(|r| r.simple).collect();
    let binned_draws: Vec<f64> = replicates
        .iter()
        .map(|r| r.binned)
        .filter(|v| v.is_finite())
        .collect();

    Ok((
        PermutationResult {
            statistic_name: StatisticName::SimpleSlope,
            observed: observed_simple,
            p_two_sided: p_value(observed_simple, &simple_draws),
            null_draws: simple_draws,
            n_excluded,
        },
        PermutationResult {
            statistic_name: StatisticName::BinnedSlope,
            observed: observed_binned,
            p_two_sided: p_value(observed_binned, &binned_draws),
            null_draws: binned_draws,
            n_excluded,
        },
    ))
}
