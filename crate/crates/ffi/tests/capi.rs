//! Exercises the C ABI the way a foreign binding would: through raw
//! pointers and status codes only.

use std::ffi::CString;
use std::io::Write;
use std::ptr;

use threadgauge_ffi::*;

fn write_temp(contents: &str) -> tempfile::NamedTempFile {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    f.write_all(contents.as_bytes()).unwrap();
    f.flush().unwrap();
    f
}

fn c_path(f: &tempfile::NamedTempFile) -> CString {
    CString::new(f.path().to_str().unwrap()).unwrap()
}

#[test]
fn lexicon_lifecycle_and_scoring() {
    let file = write_temp(threadgauge::lexicon::DEMO_LEXICON_CSV);
    let path = c_path(&file);
    let mut lex: *mut TgLexicon = ptr::null_mut();
    unsafe {
        assert_eq!(tg_lexicon_load_csv(path.as_ptr(), 10, &mut lex), TgStatus::TgOk);
        assert!(!lex.is_null());

        let (mut action, mut sensitive) = (0u32, 0u32);
        assert_eq!(
            tg_lexicon_counts(lex, &mut action, &mut sensitive),
            TgStatus::TgOk
        );
        assert!(action >= 5 && sensitive >= 3);

        let text = CString::new("Please RUN the script with sudo").unwrap();
        let mut score = TgScore {
            matches_action: 0,
            matches_sensitive: 0,
            di: 0,
        };
        assert_eq!(
            tg_score_text(lex, text.as_ptr(), false, &mut score),
            TgStatus::TgOk
        );
        assert_eq!(score.matches_action, 1);
        assert_eq!(score.matches_sensitive, 1);
        assert_eq!(score.di, 2);

        tg_lexicon_free(lex);
    }
}

#[test]
fn missing_file_and_bad_csv_are_distinct() {
    let nope = CString::new("/definitely/not/here.csv").unwrap();
    let mut lex: *mut TgLexicon = ptr::null_mut();
    unsafe {
        assert_eq!(
            tg_lexicon_load_csv(nope.as_ptr(), 10, &mut lex),
            TgStatus::TgIoError
        );
        let bad = write_temp("pattern_id,category,regex\nx,action,(\n");
        let path = c_path(&bad);
        assert_eq!(
            tg_lexicon_load_csv(path.as_ptr(), 10, &mut lex),
            TgStatus::TgParseError
        );
        assert_eq!(
            tg_lexicon_load_csv(ptr::null(), 10, &mut lex),
            TgStatus::TgNullArgument
        );
    }
}

#[test]
fn classification_respects_precedence() {
    let file = write_temp(threadgauge::classifier::DEMO_RULES_CSV);
    let path = c_path(&file);
    let mut rules: *mut TgRuleSet = ptr::null_mut();
    unsafe {
        assert_eq!(tg_ruleset_load_csv(path.as_ptr(), &mut rules), TgStatus::TgOk);
        let mut label = TgLabel::TgNeutral;

        let both = CString::new("terrible idea, please reconsider").unwrap();
        assert_eq!(
            tg_classify_comment(rules, both.as_ptr(), &mut label),
            TgStatus::TgOk
        );
        assert_eq!(label, TgLabel::TgAdverse);

        let nothing = CString::new("a calm afternoon").unwrap();
        assert_eq!(
            tg_classify_comment(rules, nothing.as_ptr(), &mut label),
            TgStatus::TgOk
        );
        assert_eq!(label, TgLabel::TgNeutral);

        tg_ruleset_free(rules);
    }
}

#[test]
fn wilson_matches_library_values() {
    let mut w = TgWilson {
        k: 0,
        n: 0,
        p_hat: 0.0,
        lo: 0.0,
        hi: 0.0,
    };
    unsafe {
        assert_eq!(tg_wilson_interval(5, 10, 0.05, &mut w), TgStatus::TgOk);
        assert!((w.lo - 0.2366).abs() < 5e-4);
        assert!((w.hi - 0.7634).abs() < 5e-4);
        assert_eq!(tg_wilson_interval(1, 0, 0.05, &mut w), TgStatus::TgInvalidInput);
    }
}

#[test]
fn logistic_fit_through_the_abi() {
    let x = [-1.2, -0.4, -0.1, 0.3, 0.8, 1.5, 2.0, -2.0];
    let y = [0u8, 0, 1, 0, 1, 1, 1, 0];
    let mut fit = TgLogisticFit {
        alpha: 0.0,
        beta: 0.0,
        se_beta: 0.0,
        loglik: 0.0,
        n_iter: 0,
    };
    unsafe {
        assert_eq!(
            tg_logistic_fit(x.as_ptr(), y.as_ptr(), x.len(), &mut fit),
            TgStatus::TgOk
        );
        assert!(fit.beta > 0.0);
        assert!(fit.se_beta > 0.0);
        // single-class input is invalid
        let ones = [1u8; 8];
        assert_eq!(
            tg_logistic_fit(x.as_ptr(), ones.as_ptr(), x.len(), &mut fit),
            TgStatus::TgNoConverge
        );
    }
}

#[test]
fn bootstrap_through_the_abi_is_seed_stable() {
    let values = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
    let mut a = TgBootstrap {
        point: 0.0,
        ci_lo: 0.0,
        ci_hi: 0.0,
    };
    let mut b = a;
    unsafe {
        assert_eq!(
            tg_bootstrap_percentile(values.as_ptr(), values.len(), false, 500, 0.05, 9, &mut a),
            TgStatus::TgOk
        );
        assert_eq!(
            tg_bootstrap_percentile(values.as_ptr(), values.len(), false, 500, 0.05, 9, &mut b),
            TgStatus::TgOk
        );
    }
    assert_eq!(a.ci_lo, b.ci_lo);
    assert_eq!(a.ci_hi, b.ci_hi);
    assert!((a.point - 3.5).abs() < 1e-12);
}

#[test]
fn version_is_a_c_string() {
    let v = unsafe { std::ffi::CStr::from_ptr(tg_version()) };
    assert!(!v.to_str().unwrap().is_empty());
}
