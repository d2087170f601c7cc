//! Simple logistic regression of a binary outcome on one predictor,
//! fit by iteratively reweighted least squares (Newton scoring).

use serde::Serialize;

use super::sample::RegressionSample;
use super::FitError;

pub const MAX_IRLS_ITER: usize = 100;
const SCORE_TOL: f64 = 1e-8;
const LOGLIK_TOL: f64 = 1e-10;
/// Coefficient magnitude at which complete separation is declared.
pub const SEPARATION_BOUND: f64 = 15.0;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct LogisticFit {
    pub alpha: f64,
    pub beta: f64,
    pub se_beta: f64,
    pub loglik: f64,
    pub converged: bool,
    pub n_iter: usize,
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// log(1 + e^x) without overflow.
#[inline]
pub(crate) fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub(crate) fn bernoulli_loglik(x: &[f64], y: &[bool], alpha: f64, beta: f64) -> f64 {
    x.iter()
        .zip(y)
        .map(|(&xi, &yi)| {
            let eta = alpha + beta * xi;
            (if yi { eta } else { 0.0 }) - softplus(eta)
        })
        .sum()
}

/// Maximum-likelihood logistic fit of `y` on `[1, x]`.
pub fn fit_logistic(x: &[f64], y: &[bool]) -> Result<LogisticFit, FitError> {
    let n = y.len();
    if n == 0 || x.len() != n {
        return Err(FitError::DegenerateInput(
            "logistic fit needs matching non-empty x and y".into(),
        ));
    }
    let n_pos = y.iter().filter(|&&v| v).count();
    if n_pos == 0 || n_pos == n {
        return Err(FitError::SingleClassOutcome);
    }

    let p_bar = n_pos as f64 / n as f64;
    let mut alpha = (p_bar / (1.0 - p_bar)).ln();
    let mut beta = 0.0f64;
    let mut loglik = bernoulli_loglik(x, y, alpha, beta);

    // (score, Fisher information) at the current coefficients
    let score_info = |alpha: f64, beta: f64| {
        let (mut score0, mut score1) = (0.0, 0.0);
        let (mut s00, mut s01, mut s11) = (0.0, 0.0, 0.0);
        for (&xi, &yi) in x.iter().zip(y) {
            let mu = sigmoid(alpha + beta * xi);
            let w = (mu * (1.0 - mu)).max(1e-12);
            let r = f64::from(u8::from(yi)) - mu;
            score0 += r;
            score1 += r * xi;
            s00 += w;
            s01 += w * xi;
            s11 += w * xi * xi;
        }
        (score0, score1, s00, s01, s11)
    };
    let se_beta = |s00: f64, s01: f64, s11: f64| {
        let det = s00 * s11 - s01 * s01;
        (s00 / det).sqrt()
    };

    for iter in 1..=MAX_IRLS_ITER {
        let (score0, score1, s00, s01, s11) = score_info(alpha, beta);
        let det = s00 * s11 - s01 * s01;
        if det.abs() < 1e-300 {
            return Err(FitError::DegenerateInput(
                "singular information matrix (constant predictor?)".into(),
            ));
        }

        if score0.abs().max(score1.abs()) < SCORE_TOL {
            return Ok(LogisticFit {
                alpha,
                beta,
                se_beta: se_beta(s00, s01, s11),
                loglik,
                converged: true,
                n_iter: iter - 1,
            });
        }

        alpha += (s11 * score0 - s01 * score1) / det;
        beta += (s00 * score1 - s01 * score0) / det;
        if beta.abs() > SEPARATION_BOUND {
            return Err(FitError::Separation { beta });
        }

        let new_loglik = bernoulli_loglik(x, y, alpha, beta);
        let rel = (new_loglik - loglik).abs() / (loglik.abs() + 1e-12);
        loglik = new_loglik;
        if rel < LOGLIK_TOL {
            let (_, _, s00, s01, s11) = score_info(alpha, beta);
            return Ok(LogisticFit {
                alpha,
                beta,
                se_beta: se_beta(s00, s01, s11),
                loglik,
                converged: true,
                n_iter: iter,
            });
        }
    }
    Err(FitError::NonConvergence {
        what: "logistic IRLS".into(),
        n_iter: MAX_IRLS_ITER,
    })
}

/// Fit the coupling model `logit(P(y=1)) = alpha + beta * z(DI)` ignoring
/// post-level clustering.
pub fn fit_logistic_simple(sample: &RegressionSample) -> Result<LogisticFit, FitError> {
    fit_logistic(&sample.z_values(), &sample.y_values())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn balanced_symmetric_data_gives_zero_slope() {
        let x = vec![-1.0, -1.0, 1.0, 1.0];
        let y = vec![true, false, true, false];
        let fit = fit_logistic(&x, &y).unwrap();
        assert!(fit.beta.abs() < 1e-6, "beta = {}", fit.beta);
        assert!(fit.alpha.abs() < 1e-6);
        assert!(fit.converged);
    }

    #[test]
    fn score_vanishes_at_solution() {
        let x = vec![-1.2, -0.4, -0.1, 0.3, 0.8, 1.5, 2.0, -2.0];
        let y = vec![false, false, true, false, true, true, true, false];
        let fit = fit_logistic(&x, &y).unwrap();
        let (mut g0, mut g1) = (0.0, 0.0);
        for (&xi, &yi) in x.iter().zip(&y) {
            let r = f64::from(u8::from(yi)) - sigmoid(fit.alpha + fit.beta * xi);
            g0 += r;
            g1 += r * xi;
        }
        assert!(g0.abs() < 1e-6 && g1.abs() < 1e-6, "score = ({g0}, {g1})");
        assert!(fit.se_beta > 0.0);
    }

    #[test]
    fn single_class_is_an_error() {
        let x = vec![0.0, 1.0, 2.0];
        let y = vec![true, true, true];
        assert!(matches!(
            fit_logistic(&x, &y).unwrap_err(),
            FitError::SingleClassOutcome
        ));
    }

    #[test]
    fn complete_separation_is_detected() {
        let x = vec![-2.0, -1.5, -1.0, 1.0, 1.5, 2.0];
        let y = vec![false, false, false, true, true, true];
        assert!(matches!(
            fit_logistic(&x, &y).unwrap_err(),
            FitError::Separation { .. }
        ));
    }
}
