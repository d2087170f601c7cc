//! Cluster-robust (sandwich) covariance with the CR1 small-sample factor.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use super::FitError;

/// Sandwich covariance `c * B^{-1} M B^{-1}` where `M` sums outer products
/// of within-cluster score sums and `c = G/(G-1) * (N-1)/(N-k)`.
///
/// `scores` pairs a cluster id with a score contribution; contributions
/// sharing an id are summed before the outer product, so callers may pass
/// either row-level or pre-aggregated cluster-level scores. `n_rows` is
/// the number of observations in the underlying regression. With every
/// row its own cluster this reduces to the HC1 heteroskedasticity-robust
/// covariance.
pub fn cluster_robust_cov(
    bread_inv: &DMatrix<f64>,
    scores: &[(usize, DVector<f64>)],
    n_rows: usize,
) -> Result<DMatrix<f64>, FitError> {
    let k = bread_inv.ncols();
    let mut by_cluster: BTreeMap<usize, DVector<f64>> = BTreeMap::new();
    for (id, s) in scores {
        by_cluster
            .entry(*id)
            .and_modify(|acc| *acc += s)
            .or_insert_with(|| s.clone());
    }
    let g = by_cluster.len();
    if g < 2 {
        return Err(FitError::DegenerateInput(
            "cluster-robust covariance needs at least 2 clusters".into(),
        ));
    }
    if n_rows <= k {
        return Err(FitError::DegenerateInput(
            "cluster-robust covariance needs n_rows > k".into(),
        ));
    }
    let mut meat = DMatrix::<f64>::zeros(k, k);
    for s in by_cluster.values() {
        meat += s * s.transpose();
    }
    let gf = g as f64;
    let nf = n_rows as f64;
    let c = gf / (gf - 1.0) * (nf - 1.0) / (nf - k as f64);
    Ok(bread_inv * meat * bread_inv * c)
}
