//! Estimators for the DI -> corrective coupling: standardization, binned
//! Wilson estimates, simple logistic regression, the random-intercept
//! logistic model, GEE, and the binned-slope statistic.

use thiserror::Error;

pub mod binned;
pub mod gee;
pub mod glmm;
pub mod logistic;
pub mod normal;
pub mod sample;
pub mod sandwich;
pub mod wilson;

pub use binned::{assign_bins, bin_corrective_probability, binned_slope, BinnedEstimate};
pub use gee::{fit_gee_exchangeable, GeeFit};
pub use glmm::{fit_glmm_laplace, laplace_loglik, ClusteredData, GlmmFit};
pub use logistic::{fit_logistic, fit_logistic_simple, LogisticFit};
pub use normal::normal_quantile;
pub use sample::{build_sample, standardize_di, RegressionSample, SampleRow, ZBasis};
pub use sandwich::cluster_robust_cov;
pub use wilson::{wilson_interval, WilsonInterval};

#[derive(Debug, Error)]
pub enum FitError {
    #[error("outcome has a single class; nothing to fit")]
    SingleClassOutcome,
    #[error("complete separation detected (|beta| reached {beta:.1})")]
    Separation { beta: f64 },
    #[error("{what} did not converge after {n_iter} iterations")]
    NonConvergence { what: String, n_iter: usize },
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
}
