//! Population-averaged logistic GEE with an exchangeable working
//! correlation, clustered by post, with sandwich standard errors.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::glmm::ClusteredData;
use super::logistic::sigmoid;
use super::sample::RegressionSample;
use super::sandwich::cluster_robust_cov;
use super::FitError;

const MAX_ALTERNATIONS: usize = 200;
const MAX_SCORING_STEPS: usize = 50;
const COEF_TOL: f64 = 1e-10;
const RHO_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct GeeFit {
    pub alpha: f64,
    pub beta: f64,
    /// Exchangeable working correlation. Reported as 0 with
    /// `rho_undefined` set when no cluster has two rows.
    pub rho: f64,
    pub robust_se_beta: f64,
    pub converged: bool,
    pub n_alternations: usize,
    pub rho_undefined: bool,
    pub rho_clipped: bool,
}

/// `R^{-1} t` for the exchangeable correlation matrix, computed without
/// materializing `R`.
fn exch_inverse_apply(t: &[f64], rho: f64, out: &mut Vec<f64>) {
    let n = t.len() as f64;
    let sum: f64 = t.iter().sum();
    let c = rho / (1.0 + (n - 1.0) * rho);
    out.clear();
    out.extend(t.iter().map(|ti| (ti - c * sum) / (1.0 - rho)));
}

struct GeeParts {
    bread: DMatrix<f64>,
    score: DVector<f64>,
    cluster_scores: Vec<(usize, DVector<f64>)>,
}

fn gee_parts(data: &ClusteredData, alpha: f64, beta: f64, rho: f64) -> GeeParts {
    let mut bread = DMatrix::<f64>::zeros(2, 2);
    let mut score = DVector::<f64>::zeros(2);
    let mut cluster_scores = Vec::with_capacity(data.clusters.len());
    let mut rinv_r = Vec::new();
    let mut rinv_s0 = Vec::new();
    let mut rinv_s1 = Vec::new();
    for (j, (x, y)) in data.clusters.iter().enumerate() {
        let n = x.len();
        // s_i = sqrt(v_i) * x_i (rows of A^{1/2} X), r~ = (y - mu)/sqrt(v)
        let mut s0 = Vec::with_capacity(n);
        let mut s1 = Vec::with_capacity(n);
        let mut resid = Vec::with_capacity(n);
        for (&xi, &yi) in x.iter().zip(y) {
            let mu = sigmoid(alpha + beta * xi);
            let v = (mu * (1.0 - mu)).max(1e-12);
            let sv = v.sqrt();
            s0.push(sv);
            s1.push(sv * xi);
            resid.push((yi - mu) / sv);
        }
        exch_inverse_apply(&resid, rho, &mut rinv_r);
        exch_inverse_apply(&s0, rho, &mut rinv_s0);
        exch_inverse_apply(&s1, rho, &mut rinv_s1);
        let g0: f64 = s0.iter().zip(&rinv_r).map(|(a, b)| a * b).sum();
        let g1: f64 = s1.iter().zip(&rinv_r).map(|(a, b)| a * b).sum();
        bread[(0, 0)] += s0.iter().zip(&rinv_s0).map(|(a, b)| a * b).sum::<f64>();
        bread[(0, 1)] += s0.iter().zip(&rinv_s1).map(|(a, b)| a * b).sum::<f64>();
        bread[(1, 1)] += s1.iter().zip(&rinv_s1).map(|(a, b)| a * b).sum::<f64>();
        score[0] += g0;
        score[1] += g1;
        cluster_scores.push((j, DVector::from_column_slice(&[g0, g1])));
    }
    bread[(1, 0)] = bread[(0, 1)];
    GeeParts {
        bread,
        score,
        cluster_scores,
    }
}

/// Moment estimator of the exchangeable correlation from Pearson
/// residual pairs within clusters. Returns `None` when no cluster
/// contributes a pair.
fn estimate_rho(data: &ClusteredData, alpha: f64, beta: f64) -> Option<f64> {
    let mut sum_sq = 0.0f64;
    let mut n_rows = 0usize;
    let mut pair_sum = 0.0f64;
    let mut n_pairs = 0usize;
    for (x, y) in &data.clusters {
        let mut e = Vec::with_capacity(x.len());
        for (&xi, &yi) in x.iter().zip(y) {
            let mu = sigmoid(alpha + beta * xi);
            let v = (mu * (1.0 - mu)).max(1e-12);
            e.push((yi - mu) / v.sqrt());
        }
        for ei in &e {
            sum_sq += ei * ei;
        }
        n_rows += e.len();
        let s: f64 = e.iter().sum();
        let sq: f64 = e.iter().map(|v| v * v).sum();
        // sum over unordered pairs = ((sum)^2 - sum of squares) / 2
        pair_sum += (s * s - sq) / 2.0;
        n_pairs += e.len() * (e.len() - 1) / 2;
    }
    if n_pairs == 0 {
        return None;
    }
    let k = 2.0;
    let phi = sum_sq / (n_rows as f64 - k);
    let denom = (n_pairs as f64 - k).max(1.0) * phi;
    Some(pair_sum / denom)
}

/// Valid range for the exchangeable correlation given the largest cluster.
fn clip_rho(rho: f64, max_cluster: usize) -> (f64, bool) {
    let lower = if max_cluster > 1 {
        (-1.0 / (max_cluster as f64 - 1.0) + 1e-6).max(-0.999_999)
    } else {
        -0.999_999
    };
    let clipped = rho.clamp(lower, 0.999_999);
    (clipped, clipped != rho)
}

pub fn fit_gee_exchangeable(sample: &RegressionSample) -> Result<GeeFit, FitError> {
    let data = ClusteredData::from_sample(sample);
    if data.clusters.len() < 2 {
        return Err(FitError::DegenerateInput(
            "GEE needs at least 2 clusters".into(),
        ));
    }
    let n_pos = sample.rows.iter().filter(|r| r.y).count();
    if n_pos == 0 || n_pos == sample.rows.len() {
        return Err(FitError::SingleClassOutcome);
    }
    let max_cluster = data.clusters.iter().map(|(x, _)| x.len()).max().unwrap_or(1);

    let mut alpha = 0.0f64;
    let mut beta = 0.0f64;
    let mut rho = 0.0f64;
    let mut rho_undefined = false;
    let mut rho_clipped = false;
    let mut converged = false;
    let mut n_alternations = 0;

    for alt in 1..=MAX_ALTERNATIONS {
        n_alternations = alt;
        // solve the estimating equations at fixed rho
        for _ in 0..MAX_SCORING_STEPS {
            let parts = gee_parts(&data, alpha, beta, rho);
            let bread_inv = parts.bread.clone().try_inverse().ok_or_else(|| {
                FitError::DegenerateInput("GEE working information is singular".into())
            })?;
            let delta = &bread_inv * &parts.score;
            alpha += delta[0];
            beta += delta[1];
            if delta.amax() < COEF_TOL * (1.0 + alpha.abs().max(beta.abs())) {
                break;
            }
        }
        let new_rho = match estimate_rho(&data, alpha, beta) {
            Some(r) => {
                let (clipped, was) = clip_rho(r, max_cluster);
                rho_clipped |= was;
                clipped
            }
            None => {
                rho_undefined = true;
                0.0
            }
        };
        let done = (new_rho - rho).abs() < RHO_TOL;
        rho = new_rho;
        if done {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(FitError::NonConvergence {
            what: "GEE alternation".into(),
            n_iter: n_alternations,
        });
    }

    let parts = gee_parts(&data, alpha, beta, rho);
    let bread_inv = parts
        .bread
        .try_inverse()
        .ok_or_else(|| FitError::DegenerateInput("GEE working information is singular".into()))?;
    let cov = cluster_robust_cov(&bread_inv, &parts.cluster_scores, data.n_rows())?;
    let robust_se_beta = cov[(1, 1)].sqrt();

    Ok(GeeFit {
        alpha,
        beta,
        rho,
        robust_se_beta,
        converged,
        n_alternations,
        rho_undefined,
        rho_clipped,
    })
}
