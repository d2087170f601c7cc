//! Random-intercept logistic regression fit by Laplace approximation.
//!
//! Model: `logit(P(y_ij = 1)) = alpha + beta * x_j + u_j` with
//! `u_j ~ N(0, sigma_u^2)` per cluster (post). The marginal likelihood
//! integrates each `u_j` out by a second-order expansion at the cluster's
//! posterior mode (found by a one-dimensional Newton solve); the outer
//! maximization over `(alpha, beta, log sigma_u)` is quasi-Newton (BFGS)
//! with a numerical gradient. Wald standard errors come from a numerical
//! Hessian at the optimum.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use super::logistic::{fit_logistic_simple, sigmoid, softplus};
use super::sample::RegressionSample;
use super::FitError;

const OUTER_MAX_ITER: usize = 500;
const OUTER_REL_TOL: f64 = 1e-9;
const INNER_TOL: f64 = 1e-11;
const LOG_SIGMA_MIN: f64 = -8.0;
const LOG_SIGMA_MAX: f64 = 3.0;
/// Fits ending below this log-sigma are flagged as boundary fits.
const BOUNDARY_LOG_SIGMA: f64 = -6.0;
/// Clusters are solved in parallel only past this count.
const PAR_THRESHOLD: usize = 512;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct GlmmFit {
    pub alpha: f64,
    pub beta: f64,
    pub sigma_u: f64,
    pub se_beta: f64,
    pub or_beta: f64,
    pub or_ci_lo: f64,
    pub or_ci_hi: f64,
    pub loglik: f64,
    pub converged: bool,
    pub n_iter: usize,
    /// sigma_u was driven to the zero boundary; the fit reduces to the
    /// simple logistic model.
    pub sigma_boundary: bool,
}

/// Per-cluster data: covariate value and outcome per row.
#[derive(Debug, Clone)]
pub struct ClusteredData {
    pub clusters: Vec<(Vec<f64>, Vec<f64>)>,
}

impl ClusteredData {
    pub fn from_sample(sample: &RegressionSample) -> Self {
        let clusters = sample
            .clusters()
            .into_iter()
            .map(|rows| {
                let x: Vec<f64> = rows.iter().map(|&i| sample.rows[i].z_di).collect();
                let y: Vec<f64> = rows
                    .iter()
                    .map(|&i| f64::from(u8::from(sample.rows[i].y)))
                    .collect();
                (x, y)
            })
            .collect();
        ClusteredData { clusters }
    }

    pub fn n_rows(&self) -> usize {
        self.clusters.iter().map(|(x, _)| x.len()).sum()
    }
}

/// Posterior mode of one cluster's random intercept and the negative
/// curvature of the joint log density there.
fn cluster_mode(x: &[f64], y: &[f64], alpha: f64, beta: f64, s2: f64) -> (f64, f64, f64) {
    let mut u = 0.0f64;
    let g_at = |u: f64| {
        let mut g = 0.0;
        let mut g1 = -u / s2;
        let mut neg_g2 = 1.0 / s2;
        for (&xi, &yi) in x.iter().zip(y) {
            let eta = alpha + beta * xi + u;
            let mu = sigmoid(eta);
            g += yi * eta - softplus(eta);
            g1 += yi - mu;
            neg_g2 += mu * (1.0 - mu);
        }
        g -= u * u / (2.0 * s2);
        (g, g1, neg_g2)
    };
    let (mut g, mut g1, mut neg_g2) = g_at(u);
    for _ in 0..100 {
        if g1.abs() < INNER_TOL * (1.0 + neg_g2) {
            break;
        }
        let mut step = g1 / neg_g2;
        // the joint density is strictly log-concave, so damped Newton
        // always makes progress
        let mut trial = u + step;
        let (mut gt, mut g1t, mut ng2t) = g_at(trial);
        let mut halvings = 0;
        while gt < g && halvings < 50 {
            step *= 0.5;
            trial = u + step;
            let r = g_at(trial);
            gt = r.0;
            g1t = r.1;
            ng2t = r.2;
            halvings += 1;
        }
        u = trial;
        g = gt;
        g1 = g1t;
        neg_g2 = ng2t;
    }
    (u, g, neg_g2)
}

/// Laplace-approximate marginal log-likelihood at `(alpha, beta, log_sigma)`.
pub fn laplace_loglik(data: &ClusteredData, alpha: f64, beta: f64, log_sigma: f64) -> f64 {
    let ls = log_sigma.clamp(LOG_SIGMA_MIN, LOG_SIGMA_MAX);
    let s2 = (2.0 * ls).exp();
    let per_cluster = |(x, y): &(Vec<f64>, Vec<f64>)| -> f64 {
        let (_, g, neg_g2) = cluster_mode(x, y, alpha, beta, s2);
        g - ls - 0.5 * neg_g2.ln()
    };
    if data.clusters.len() >= PAR_THRESHOLD {
        let parts: Vec<f64> = data.clusters.par_iter().map(per_cluster).collect();
        parts.iter().sum()
    } else {
        data.clusters.iter().map(per_cluster).sum()
    }
}

fn numerical_gradient<F: Fn(&[f64; 3]) -> f64>(f: &F, x: &[f64; 3]) -> [f64; 3] {
    let mut g = [0.0f64; 3];
    for k in 0..3 {
        let h = 1e-6 * (1.0 + x[k].abs());
        let mut xp = *x;
        let mut xm = *x;
        xp[k] += h;
        xm[k] -= h;
        g[k] = (f(&xp) - f(&xm)) / (2.0 * h);
    }
    g
}

struct Bfgs {
    x: [f64; 3],
    fval: f64,
    n_iter: usize,
    converged: bool,
}

/// BFGS ascent with backtracking line search.
fn bfgs_maximize<F: Fn(&[f64; 3]) -> f64>(f: &F, x0: [f64; 3]) -> Bfgs {
    let mut x = x0;
    let mut fval = f(&x);
    let mut grad = numerical_gradient(f, &x);
    let mut h_inv = DMatrix::<f64>::identity(3, 3);
    let mut converged = false;
    let mut n_iter = 0;

    for iter in 1..=OUTER_MAX_ITER {
        n_iter = iter;
        let g = DVector::from_column_slice(&grad);
        let mut dir = &h_inv * &g;
        if dir.dot(&g) <= 0.0 {
            // reset on loss of positive definiteness
            h_inv = DMatrix::identity(3, 3);
            dir = g.clone();
        }
        let mut t = 1.0f64;
        let slope = dir.dot(&g);
        let mut x_new = x;
        let mut f_new = f64::NEG_INFINITY;
        for _ in 0..60 {
            for k in 0..3 {
                x_new[k] = x[k] + t * dir[k];
            }
            f_new = f(&x_new);
            if f_new >= fval + 1e-4 * t * slope {
                break;
            }
            t *= 0.5;
        }
        if !f_new.is_finite() || f_new < fval {
            // no ascent possible along this direction
            converged = true;
            break;
        }
        let grad_new = numerical_gradient(f, &x_new);
        let s = DVector::from_column_slice(&[
            x_new[0] - x[0],
            x_new[1] - x[1],
            x_new[2] - x[2],
        ]);
        // BFGS update on the negated problem == flipped-sign y here
        let yv = DVector::from_column_slice(&[
            grad[0] - grad_new[0],
            grad[1] - grad_new[1],
            grad[2] - grad_new[2],
        ]);
        let sy = s.dot(&yv);
        if sy > 1e-12 {
            let hy = &h_inv * &yv;
            let yhy = yv.dot(&hy);
            let rho = 1.0 / sy;
            h_inv = &h_inv
                + (sy + yhy) * rho * rho * (&s * s.transpose())
                - rho * (&hy * s.transpose() + &s * hy.transpose());
        }
        let rel = (f_new - fval).abs() / (fval.abs() + 1.0);
        x = x_new;
        fval = f_new;
        grad = grad_new;
        if rel < OUTER_REL_TOL {
            converged = true;
            break;
        }
    }
    Bfgs {
        x,
        fval,
        n_iter,
        converged,
    }
}

fn numerical_hessian<F: Fn(&[f64; 3]) -> f64>(f: &F, x: &[f64; 3], dims: &[usize]) -> DMatrix<f64> {
    let k = dims.len();
    let mut h = DMatrix::<f64>::zeros(k, k);
    let f0 = f(x);
    let steps: Vec<f64> = dims.iter().map(|&d| 1e-4 * (1.0 + x[d].abs())).collect();
    for (a, &da) in dims.iter().enumerate() {
        for (b, &db) in dims.iter().enumerate().skip(a) {
            let v = if a == b {
                let mut xp = *x;
                let mut xm = *x;
                xp[da] += steps[a];
                xm[da] -= steps[a];
                (f(&xp) - 2.0 * f0 + f(&xm)) / (steps[a] * steps[a])
            } else {
                let mut xpp = *x;
                let mut xpm = *x;
                let mut xmp = *x;
                let mut xmm = *x;
                xpp[da] += steps[a];
                xpp[db] += steps[b];
                xpm[da] += steps[a];
                xpm[db] -= steps[b];
                xmp[da] -= steps[a];
                xmp[db] += steps[b];
                xmm[da] -= steps[a];
                xmm[db] -= steps[b];
                (f(&xpp) - f(&xpm) - f(&xmp) + f(&xmm)) / (4.0 * steps[a] * steps[b])
            };
            h[(a, b)] = v;
            h[(b, a)] = v;
        }
    }
    h
}

/// Fit the post-level random-intercept logistic model by Laplace
/// approximation. Requires at least two clusters and both outcome classes.
pub fn fit_glmm_laplace(sample: &RegressionSample) -> Result<GlmmFit, FitError> {
    let data = ClusteredData::from_sample(sample);
    fit_glmm_laplace_data(&data, sample)
}

fn fit_glmm_laplace_data(
    data: &ClusteredData,
    sample: &RegressionSample,
) -> Result<GlmmFit, FitError> {
    if data.clusters.len() < 2 {
        return Err(FitError::DegenerateInput(
            "random-intercept fit needs at least 2 clusters".into(),
        ));
    }
    let simple = fit_logistic_simple(sample)?;

    let objective = |p: &[f64; 3]| laplace_loglik(data, p[0], p[1], p[2]);
    let start = [simple.alpha, simple.beta, (0.5f64).ln()];
    let result = bfgs_maximize(&objective, start);
    if !result.converged {
        return Err(FitError::NonConvergence {
            what: format!(
                "GLMM outer optimization (last point alpha={:.6}, beta={:.6}, log_sigma={:.6})",
                result.x[0], result.x[1], result.x[2]
            ),
            n_iter: result.n_iter,
        });
    }
    let [alpha, beta, log_sigma] = result.x;
    let log_sigma = log_sigma.clamp(LOG_SIGMA_MIN, LOG_SIGMA_MAX);
    let sigma_boundary = log_sigma <= BOUNDARY_LOG_SIGMA;
    let sigma_u = log_sigma.exp();

    // At the sigma boundary the log-sigma direction is flat; take the
    // Hessian over (alpha, beta) only.
    let dims: Vec<usize> = if sigma_boundary { vec![0, 1] } else { vec![0, 1, 2] };
    let hess = numerical_hessian(&objective, &result.x, &dims);
    let info = -hess;
    let cov = info.try_inverse().ok_or_else(|| FitError::NonConvergence {
        what: "GLMM observed information is singular".into(),
        n_iter: result.n_iter,
    })?;
    let var_beta = cov[(1, 1)];
    if !(var_beta.is_finite() && var_beta > 0.0) {
        return Err(FitError::NonConvergence {
            what: format!("GLMM beta variance not positive ({var_beta})"),
            n_iter: result.n_iter,
        });
    }
    let se_beta = var_beta.sqrt();

    Ok(GlmmFit {
        alpha,
        beta,
        sigma_u,
        se_beta,
        or_beta: beta.exp(),
        or_ci_lo: (beta - 1.96 * se_beta).exp(),
        or_ci_hi: (beta + 1.96 * se_beta).exp(),
        loglik: result.fval,
        converged: true,
        n_iter: result.n_iter,
        sigma_boundary,
    })
}
