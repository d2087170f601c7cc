//! Nonparametric percentile bootstrap over per-thread values.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::rng::substream_rng;
use super::ResampleError;

const RNG_LABEL: &str = "bootstrap";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimand {
    MeanDelta,
    MedianDelta,
}

#[derive(Debug, Clone, Serialize)]
pub struct BootstrapResult {
    pub estimand: Estimand,
    pub point: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub n_resamples: usize,
    pub alpha: f64,
}

pub(crate) fn mean_of(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Median with the midpoint convention for even lengths.
pub(crate) fn median_of(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn estimate(estimand: Estimand, values: &mut [f64]) -> f64 {
    match estimand {
        Estimand::MeanDelta => mean_of(values),
        Estimand::MedianDelta => median_of(values),
    }
}

/// Empirical quantile as the order statistic at `ceil(q * B) - 1`
/// (inverse-CDF convention) of the sorted draws.
pub fn quantile_index(q: f64, b: usize) -> usize {
    ((q * b as f64).ceil() as usize).clamp(1, b) - 1
}

/// Percentile bootstrap: resample values with replacement, recompute the
/// estimand per resample, and take the empirical `(alpha/2, 1 - alpha/2)`
/// quantiles as the interval.
pub fn bootstrap_percentile(
    values: &[f64],
    estimand: Estimand,
    n_resamples: usize,
    alpha: f64,
    seed: u64,
) -> Result<BootstrapResult, ResampleError> {
    if values.is_empty() {
        return Err(ResampleError::DegenerateInput(
            "bootstrap needs non-empty values".into(),
        ));
    }
    if n_resamples < 2 {
        return Err(ResampleError::DegenerateInput(
            "bootstrap needs at least 2 resamples".into(),
        ));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(ResampleError::DegenerateInput(format!(
            "alpha must lie in (0,1), got {alpha}"
        )));
    }
    let n = values.len();
    let mut point_buf = values.to_vec();
    let point = estimate(estimand, &mut point_buf);

    let mut stats: Vec<f64> = (0..n_resamples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream_rng(seed, RNG_LABEL, i);
            let mut resample: Vec<f64> =
                (0..n).map(|_| values[rng.random_range(0..n)]).collect();
            estimate(estimand, &mut resample)
        })
        .collect();
    stats.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let ci_lo = stats[quantile_index(alpha / 2.0, n_resamples)];
    let ci_hi = stats[quantile_index(1.0 - alpha / 2.0, n_resamples)];

    Ok(BootstrapResult {
        estimand,
        point,
        ci_lo,
        ci_hi,
        n_resamples,
        alpha,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_input_gives_zero_width_interval() {
        let values = vec![2.5; 12];
        let r = bootstrap_percentile(&values, Estimand::MeanDelta, 500, 0.05, 4).unwrap();
        assert_eq!(r.ci_lo, 2.5);
        assert_eq!(r.ci_hi, 2.5);
        assert_eq!(r.point, 2.5);
    }

    #[test]
    fn two_point_support_endpoints() {
        let values = vec![-1.0, 1.0];
        let r = bootstrap_percentile(&values, Estimand::MeanDelta, 2000, 0.05, 8).unwrap();
        for e in [r.ci_lo, r.ci_hi] {
            assert!(e == -1.0 || e == 0.0 || e == 1.0, "endpoint {e}");
        }
        assert!(r.ci_lo <= r.ci_hi);
    }

    #[test]
    fn interval_brackets_point_for_mean() {
        let values: Vec<f64> = (0..40).map(|i| (i as f64) / 7.0 - 2.0).collect();
        let r = bootstrap_percentile(&values, Estimand::MeanDelta, 2000, 0.05, 3).unwrap();
        assert!(r.ci_lo <= r.point && r.point <= r.ci_hi);
    }

    #[test]
    fn median_uses_midpoint_for_even_lengths() {
        let mut v = vec![4.0, 1.0, 3.0, 2.0];
        assert_eq!(median_of(&mut v), 2.5);
        let mut w = vec![5.0, 1.0, 3.0];
        assert_eq!(median_of(&mut w), 3.0);
    }

    #[test]
    fn single_value_input_errors_only_on_resamples() {
        assert!(bootstrap_percentile(&[1.0], Estimand::MeanDelta, 1, 0.05, 0).is_err());
        assert!(bootstrap_percentile(&[], Estimand::MeanDelta, 100, 0.05, 0).is_err());
    }

    #[test]
    fn seed_determinism() {
        let values: Vec<f64> = (0..25).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
        let a = bootstrap_percentile(&values, Estimand::MedianDelta, 999, 0.1, 42).unwrap();
        let b = bootstrap_percentile(&values, Estimand::MedianDelta, 999, 0.1, 42).unwrap();
        assert_eq!(a.ci_lo, b.ci_lo);
        assert_eq!(a.ci_hi, b.ci_hi);
    }
}
