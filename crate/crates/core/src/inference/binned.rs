//! Binned corrective-probability estimates and the binned-slope statistic.
//!
//! Bin 0 holds the DI=0 posts; posts with DI>0 are split into quantile
//! bins at the post level. Duplicate quantile edges collapse, so heavy
//! ties merge adjacent bins. Per-bin proportions aggregate comment rows of
//! the member posts and carry Wilson intervals.

use std::collections::BTreeMap;

use serde::Serialize;

use super::sample::RegressionSample;
use super::wilson::{wilson_interval, WilsonInterval};
use super::FitError;

#[derive(Debug, Clone, Serialize)]
pub struct BinnedEstimate {
    pub bin_index: usize,
    pub bin_rule: String,
    pub di_mean: f64,
    pub k: u64,
    pub n: u64,
    pub wilson: WilsonInterval,
}

/// Per-row bin membership, reusable across label permutations (the bins
/// depend only on DI).
#[derive(Debug, Clone)]
pub struct BinAssignment {
    pub row_bins: Vec<usize>,
    pub n_bins: usize,
    rules: Vec<String>,
    di_means: Vec<f64>,
}

/// Linear-interpolation quantile of sorted values.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Assign every sample row to a DI bin: bin 0 for DI=0 posts, then up to
/// `q_bins` quantile bins over the positive post-level DI values.
pub fn assign_bins(sample: &RegressionSample, q_bins: usize) -> Result<BinAssignment, FitError> {
    if sample.rows.is_empty() {
        return Err(FitError::DegenerateInput("empty sample".into()));
    }
    if q_bins == 0 {
        return Err(FitError::DegenerateInput("q_bins must be >= 1".into()));
    }
    let post_di: BTreeMap<&str, u32> = sample
        .rows
        .iter()
        .map(|r| (r.post_id.as_str(), r.di_raw))
        .collect();
    let mut positive: Vec<f64> = post_di
        .values()
        .filter(|di| **di > 0)
        .map(|di| f64::from(*di))
        .collect();
    positive.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let mut edges: Vec<f64> = if positive.is_empty() {
        Vec::new()
    } else {
        (1..q_bins)
            .map(|m| quantile_sorted(&positive, m as f64 / q_bins as f64))
            .collect()
    };
    edges.dedup();

    // tentative positive-bin index per post, then compress empty bins
    let tentative = |di: u32| -> usize {
        let x = f64::from(di);
        edges.iter().filter(|e| x > **e).count()
    };
    let mut seen: Vec<bool> = vec![false; edges.len() + 2];
    let has_zero = post_di.values().any(|di| *di == 0);
    if has_zero {
        seen[0] = true;
    }
    for di in post_di.values().filter(|di| **di > 0) {
        seen[1 + tentative(*di)] = true;
    }
    let mut compact = vec![usize::MAX; seen.len()];
    let mut next = 0usize;
    for (i, s) in seen.iter().enumerate() {
        if *s {
            compact[i] = next;
            next += 1;
        }
    }
    let n_bins = next;

    let bin_of_post: BTreeMap<&str, usize> = post_di
        .iter()
        .map(|(post, di)| {
            let raw = if *di == 0 { 0 } else { 1 + tentative(*di) };
            (*post, compact[raw])
        })
        .collect();
    let row_bins: Vec<usize> = sample
        .rows
        .iter()
        .map(|r| bin_of_post[r.post_id.as_str()])
        .collect();

    // post-level DI mean and a human-readable rule per emitted bin
    let mut di_sums = vec![(0.0f64, 0usize); n_bins];
    let mut di_ranges = vec![(f64::INFINITY, f64::NEG_INFINITY); n_bins];
    for (post, di) in &post_di {
        let b = bin_of_post[post];
        di_sums[b].0 += f64::from(*di);
        di_sums[b].1 += 1;
        di_ranges[b].0 = di_ranges[b].0.min(f64::from(*di));
        di_ranges[b].1 = di_ranges[b].1.max(f64::from(*di));
    }
    let di_means: Vec<f64> = di_sums.iter().map(|(s, c)| s / *c as f64).collect();
    let rules: Vec<String> = di_ranges
        .iter()
        .enumerate()
        .map(|(b, (lo, hi))| {
            if b == 0 && has_zero {
                "di = 0".to_string()
            } else if lo == hi {
                format!("di = {lo}")
            } else {
                format!("{lo} <= di <= {hi}")
            }
        })
        .collect();

    Ok(BinAssignment {
        row_bins,
        n_bins,
        rules,
        di_means,
    })
}

/// Per-bin corrective counts for an arbitrary outcome vector (used by the
/// permutation test with shuffled labels).
pub fn bin_counts(assignment: &BinAssignment, y: &[bool]) -> Vec<(u64, u64)> {
    let mut counts = vec![(0u64, 0u64); assignment.n_bins];
    for (b, yi) in assignment.row_bins.iter().zip(y) {
        counts[*b].1 += 1;
        counts[*b].0 += u64::from(*yi);
    }
    counts
}

/// Binned corrective-probability estimates with Wilson intervals.
pub fn bin_corrective_probability(
    sample: &RegressionSample,
    q_bins: usize,
    alpha: f64,
) -> Result<Vec<BinnedEstimate>, FitError> {
    let assignment = assign_bins(sample, q_bins)?;
    let counts = bin_counts(&assignment, &sample.y_values());
    counts
        .iter()
        .enumerate()
        .map(|(b, (k, n))| {
            Ok(BinnedEstimate {
                bin_index: b,
                bin_rule: assignment.rules[b].clone(),
                di_mean: assignment.di_means[b],
                k: *k,
                n: *n,
                wilson: wilson_interval(*k, *n, alpha)?,
            })
        })
        .collect()
}

/// Unweighted OLS slope of the per-bin proportions on the bin index.
pub fn binned_slope(bins: &[BinnedEstimate]) -> Result<f64, FitError> {
    slope_of(
        &bins
            .iter()
            .map(|b| (b.bin_index as f64, b.wilson.p_hat))
            .collect::<Vec<_>>(),
    )
}

/// Slope from raw per-bin counts (permutation path).
pub fn binned_slope_from_counts(counts: &[(u64, u64)]) -> Result<f64, FitError> {
    slope_of(
        &counts
            .iter()
            .enumerate()
            .filter(|(_, (_, n))| *n > 0)
            .map(|(b, (k, n))| (b as f64, *k as f64 / *n as f64))
            .collect::<Vec<_>>(),
    )
}

fn slope_of(points: &[(f64, f64)]) -> Result<f64, FitError> {
    if points.len() < 2 {
        return Err(FitError::DegenerateInput(
            "binned slope needs at least two bins".into(),
        ));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|(x, _)| x).sum::<f64>() / n;
    let my = points.iter().map(|(_, y)| y).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = points.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    Ok(sxy / sxx)
}
