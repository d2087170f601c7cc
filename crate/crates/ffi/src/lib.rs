//! C ABI for the threadgauge toolkit.
//!
//! Handles are opaque pointers created by `tg_*_load_csv` and released by
//! the matching `tg_*_free`. Every fallible call returns a `TgStatus`;
//! results come back through out-parameters. Strings are NUL-terminated
//! UTF-8. The generated header lives in `include/threadgauge.h`.

use std::ffi::{c_char, CStr};

use threadgauge::classifier::{classify_body, InteractionType, RuleSet};
use threadgauge::inference::{fit_logistic, wilson_interval};
use threadgauge::lexicon::{CountMode, Lexicon};
use threadgauge::resampling::{bootstrap_percentile, Estimand};

/// Status code returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TgStatus {
    TgOk = 0,
    TgNullArgument = 1,
    TgUtf8Error = 2,
    TgIoError = 3,
    TgParseError = 4,
    TgInvalidInput = 5,
    TgNoConverge = 6,
}

/// Opaque directive-intensity lexicon handle.
pub struct TgLexicon {
    _private: [u8; 0],
}

/// Opaque reply-classification rule-set handle.
pub struct TgRuleSet {
    _private: [u8; 0],
}

/// Directive-intensity score of one text.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct TgScore {
    pub matches_action: u32,
    pub matches_sensitive: u32,
    pub di: u32,
}

/// Wilson score interval for a binomial proportion.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct TgWilson {
    pub k: u64,
    pub n: u64,
    pub p_hat: f64,
    pub lo: f64,
    pub hi: f64,
}

/// Simple logistic regression fit of y on [1, x].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct TgLogisticFit {
    pub alpha: f64,
    pub beta: f64,
    pub se_beta: f64,
    pub loglik: f64,
    pub n_iter: u32,
}

/// Reply interaction type.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TgLabel {
    TgAdverse = 0,
    TgCorrective = 1,
    TgAffirmation = 2,
    TgNeutral = 3,
}

/// Percentile bootstrap interval.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct TgBootstrap {
    pub point: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

fn lexicon_ref<'a>(ptr: *const TgLexicon) -> Option<&'a Lexicon> {
    unsafe { (ptr as *const Lexicon).as_ref() }
}

fn ruleset_ref<'a>(ptr: *const TgRuleSet) -> Option<&'a RuleSet> {
    unsafe { (ptr as *const RuleSet).as_ref() }
}

unsafe fn cstr<'a>(ptr: *const c_char) -> Result<&'a str, TgStatus> {
    if ptr.is_null() {
        return Err(TgStatus::TgNullArgument);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| TgStatus::TgUtf8Error)
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn tg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Load a lexicon from a CSV file with header `pattern_id,category,regex`.
/// On success writes a new handle to `out`; release with
/// [`tg_lexicon_free`].
///
/// # Safety
/// `path` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tg_lexicon_load_csv(
    path: *const c_char,
    cap: u32,
    out: *mut *mut TgLexicon,
) -> TgStatus {
    if out.is_null() {
        return TgStatus::TgNullArgument;
    }
    let path = match cstr(path) {
        Ok(p) => p,
        Err(s) => return s,
    };
    let file = match std::fs::File::open(path) {
        Ok(f) => f,
        Err(_) => return TgStatus::TgIoError,
    };
    match Lexicon::from_csv_reader(file, cap) {
        Ok(lexicon) => {
            *out = Box::into_raw(Box::new(lexicon)) as *mut TgLexicon;
            TgStatus::TgOk
        }
        Err(_) => TgStatus::TgParseError,
    }
}

/// Pattern counts per category.
///
/// # Safety
/// `lexicon` must be a live handle; `action`/`sensitive` must be valid.
#[no_mangle]
pub unsafe extern "C" fn tg_lexicon_counts(
    lexicon: *const TgLexicon,
    action: *mut u32,
    sensitive: *mut u32,
) -> TgStatus {
    let Some(lex) = lexicon_ref(lexicon) else {
        return TgStatus::TgNullArgument;
    };
    if action.is_null() || sensitive.is_null() {
        return TgStatus::TgNullArgument;
    }
    let (a, s) = lex.counts();
    *action = a as u32;
    *sensitive = s as u32;
    TgStatus::TgOk
}

/// Release a lexicon handle. NULL is ignored.
///
/// # Safety
/// `lexicon` must have come from [`tg_lexicon_load_csv`] and not been
/// freed already.
#[no_mangle]
pub unsafe extern "C" fn tg_lexicon_free(lexicon: *mut TgLexicon) {
    if !lexicon.is_null() {
        drop(Box::from_raw(lexicon as *mut Lexicon));
    }
}

/// Score one text. `count_occurrences = false` counts each pattern at
/// most once (the default scoring mode).
///
/// # Safety
/// `lexicon` must be a live handle; `text` a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn tg_score_text(
    lexicon: *const TgLexicon,
    text: *const c_char,
    count_occurrences: bool,
    out: *mut TgScore,
) -> TgStatus {
    let Some(lex) = lexicon_ref(lexicon) else {
        return TgStatus::TgNullArgument;
    };
    if out.is_null() {
        return TgStatus::TgNullArgument;
    }
    let text = match cstr(text) {
        Ok(t) => t,
        Err(s) => return s,
    };
    let mode = if count_occurrences {
        CountMode::Occurrences
    } else {
        CountMode::Patterns
    };
    let score = lex.score_text(text, mode);
    *out = TgScore {
        matches_action: score.matches_action,
        matches_sensitive: score.matches_sensitive,
        di: score.di,
    };
    TgStatus::TgOk
}

/// Load reply-classification rules from a CSV file with header
/// `family,regex`. Release with [`tg_ruleset_free`].
///
/// # Safety
/// `path` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tg_ruleset_load_csv(
    path: *const c_char,
    out: *mut *mut TgRuleSet,
) -> TgStatus {
    if out.is_null() {
        return TgStatus::TgNullArgument;
    }
    let path = match cstr(path) {
        Ok(p) => p,
        Err(s) => return s,
    };
    let file = match std::fs::File::open(path) {
        Ok(f) => f,
        Err(_) => return TgStatus::TgIoError,
    };
    match RuleSet::from_csv_reader(file) {
        Ok(rules) => {
            *out = Box::into_raw(Box::new(rules)) as *mut TgRuleSet;
            TgStatus::TgOk
        }
        Err(_) => TgStatus::TgParseError,
    }
}

/// Release a rule-set handle. NULL is ignored.
///
/// # Safety
/// `rules` must have come from [`tg_ruleset_load_csv`] and not been freed
/// already.
#[no_mangle]
pub unsafe extern "C" fn tg_ruleset_free(rules: *mut TgRuleSet) {
    if !rules.is_null() {
        drop(Box::from_raw(rules as *mut RuleSet));
    }
}

/// Classify one comment body under the fixed precedence
/// Adverse > Corrective > Affirmation > Neutral.
///
/// # Safety
/// `rules` must be a live handle; `body` a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn tg_classify_comment(
    rules: *const TgRuleSet,
    body: *const c_char,
    out: *mut TgLabel,
) -> TgStatus {
    let Some(ruleset) = ruleset_ref(rules) else {
        return TgStatus::TgNullArgument;
    };
    if out.is_null() {
        return TgStatus::TgNullArgument;
    }
    let body = match cstr(body) {
        Ok(b) => b,
        Err(s) => return s,
    };
    let (label, _) = classify_body(body, ruleset);
    *out = match label {
        InteractionType::Adverse => TgLabel::TgAdverse,
        InteractionType::Corrective => TgLabel::TgCorrective,
        InteractionType::Affirmation => TgLabel::TgAffirmation,
        InteractionType::Neutral => TgLabel::TgNeutral,
    };
    TgStatus::TgOk
}

/// Wilson score interval for `k` successes in `n` trials at significance
/// `alpha`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tg_wilson_interval(
    k: u64,
    n: u64,
    alpha: f64,
    out: *mut TgWilson,
) -> TgStatus {
    if out.is_null() {
        return TgStatus::TgNullArgument;
    }
    match wilson_interval(k, n, alpha) {
        Ok(w) => {
            *out = TgWilson {
                k: w.k,
                n: w.n,
                p_hat: w.p_hat,
                lo: w.lo,
                hi: w.hi,
            };
            TgStatus::TgOk
        }
        Err(_) => TgStatus::TgInvalidInput,
    }
}

/// Maximum-likelihood logistic regression of a 0/1 outcome on one
/// predictor. `y` holds 0/1 bytes.
///
/// # Safety
/// `x` and `y` must point to `n` readable elements; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn tg_logistic_fit(
    x: *const f64,
    y: *const u8,
    n: usize,
    out: *mut TgLogisticFit,
) -> TgStatus {
    if x.is_null() || y.is_null() || out.is_null() {
        return TgStatus::TgNullArgument;
    }
    let xs = std::slice::from_raw_parts(x, n);
    let ys: Vec<bool> = std::slice::from_raw_parts(y, n)
        .iter()
        .map(|v| *v != 0)
        .collect();
    match fit_logistic(xs, &ys) {
        Ok(fit) => {
            *out = TgLogisticFit {
                alpha: fit.alpha,
                beta: fit.beta,
                se_beta: fit.se_beta,
                loglik: fit.loglik,
                n_iter: fit.n_iter as u32,
            };
            TgStatus::TgOk
        }
        Err(threadgauge::inference::FitError::DegenerateInput(_)) => TgStatus::TgInvalidInput,
        Err(_) => TgStatus::TgNoConverge,
    }
}

/// Seeded percentile bootstrap of the mean or median over `values`.
///
/// # Safety
/// `values` must point to `n` readable elements; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn tg_bootstrap_percentile(
    values: *const f64,
    n: usize,
    use_median: bool,
    n_resamples: usize,
    alpha: f64,
    seed: u64,
    out: *mut TgBootstrap,
) -> TgStatus {
    if values.is_null() || out.is_null() {
        return TgStatus::TgNullArgument;
    }
    let vals = std::slice::from_raw_parts(values, n);
    let estimand = if use_median {
        Estimand::MedianDelta
    } else {
        Estimand::MeanDelta
    };
    match bootstrap_percentile(vals, estimand, n_resamples, alpha, seed) {
        Ok(r) => {
            *out = TgBootstrap {
                point: r.point,
                ci_lo: r.ci_lo,
                ci_hi: r.ci_hi,
            };
            TgStatus::TgOk
        }
        Err(_) => TgStatus::TgInvalidInput,
    }
}
