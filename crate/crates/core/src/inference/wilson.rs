//! Wilson score interval for a binomial proportion.

use serde::Serialize;

use super::normal::normal_quantile;
use super::FitError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WilsonInterval {
    pub k: u64,
    pub n: u64,
    pub p_hat: f64,
    pub lo: f64,
    pub hi: f64,
    pub alpha: f64,
}

/// Wilson score interval with normal quantile `z_{1-alpha/2}`. The lower
/// bound is exactly 0 when `k = 0` and the upper bound exactly 1 when
/// `k = n`.
pub fn wilson_interval(k: u64, n: u64, alpha: f64) -> Result<WilsonInterval, FitError> {
    if n == 0 {
        return Err(FitError::DegenerateInput("wilson interval needs n >= 1".into()));
    }
    if k > n {
        return Err(FitError::DegenerateInput(format!(
            "wilson interval needs k <= n, got k={k} n={n}"
        )));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(FitError::DegenerateInput(format!(
            "alpha must lie in (0,1), got {alpha}"
        )));
    }
    let nf = n as f64;
    let p_hat = k as f64 / nf;
    let z = normal_quantile(1.0 - alpha / 2.0);
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p_hat + z2 / (2.0 * nf)) / denom;
    let half = z * (p_hat * (1.0 - p_hat) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    let lo = if k == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if k == n { 1.0 } else { (center + half).min(1.0) };
    Ok(WilsonInterval {
        k,
        n,
        p_hat,
        lo,
        hi,
        alpha,
    })
}
