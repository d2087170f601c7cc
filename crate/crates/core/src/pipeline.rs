//! Full-pipeline orchestration and the reproducibility manifest.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::archive::{archive_summary, build_threads, ArchiveStats, CommentRecord, PostRecord};
use crate::classifier::{classify_all, labels_by_id, LabelFrequencies, RuleSet};
use crate::inference::{
    bin_corrective_probability, binned_slope, build_sample, fit_gee_exchangeable,
    fit_glmm_laplace, fit_logistic_simple, BinnedEstimate, FitError, GeeFit, GlmmFit, LogisticFit,
    ZBasis,
};
use crate::lexicon::{score_comments, score_posts, CountMode, DirectiveScore, Lexicon};
use crate::longitudinal::{
    build_fe_panel, event_aligned_deltas, fit_within_fe, fixed_n_comparison, resolve_fe_events,
    stratify_and_compare, EventAlignment, FeOutcome, StrataTable,
};
use crate::resampling::{
    bootstrap_percentile, permutation_null_test, Estimand, PermutationResult, ResampleError,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Archive(#[from] crate::archive::ArchiveError),
    #[error(transparent)]
    Lexicon(#[from] crate::lexicon::LexiconError),
    #[error(transparent)]
    Rules(#[from] crate::classifier::RuleSetError),
    #[error(transparent)]
    DerivedIo(#[from] crate::io::IoError),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Resample(#[from] ResampleError),
    #[error(transparent)]
    Synth(#[from] crate::synth::SynthError),
    #[error("archive is empty: {0}")]
    EmptyArchive(String),
}

/// Everything the `report` pipeline needs beyond the input files.
#[derive(Debug, Clone, Serialize)]
pub struct ReportParams {
    pub cap: u32,
    pub count_mode: CountMode,
    pub z_basis: ZBasis,
    pub bins: usize,
    pub perms: usize,
    pub resamples: usize,
    pub alpha: f64,
    pub window_hours: f64,
    pub fixed_n: usize,
    pub m_values: Vec<usize>,
    pub e_comments: usize,
    pub h_hours: f64,
    pub esc_threshold: u32,
    pub seed: u64,
}

impl Default for ReportParams {
    fn default() -> Self {
        ReportParams {
            cap: 10,
            count_mode: CountMode::Patterns,
            z_basis: ZBasis::Posts,
            bins: 4,
            perms: 1000,
            resamples: 20000,
            alpha: 0.05,
            window_hours: 12.0,
            fixed_n: 5,
            m_values: vec![5, 10, 20],
            e_comments: 5,
            h_hours: 6.0,
            esc_threshold: 3,
            seed: 0,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct PermutationSummary {
    pub observed: f64,
    pub p_two_sided: f64,
    pub n_replicates: usize,
    pub n_excluded: usize,
}

impl From<&PermutationResult> for PermutationSummary {
    fn from(r: &PermutationResult) -> Self {
        PermutationSummary {
            observed: r.observed,
            p_two_sided: r.p_two_sided,
            n_replicates: r.null_draws.len(),
            n_excluded: r.n_excluded,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct BootstrapSummary {
    pub point: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

#[derive(Debug, Serialize)]
pub struct EventAlignedReport {
    pub n_candidate_threads: usize,
    pub n_regulatable: usize,
    pub n_excluded: usize,
    pub mean_delta: Option<BootstrapSummary>,
    pub median_delta: Option<BootstrapSummary>,
    pub fixed_n: usize,
    pub fixed_n_median: Option<BootstrapSummary>,
}

#[derive(Debug, Serialize)]
pub struct FeReport {
    pub m: usize,
    pub beta: Option<f64>,
    pub se: Option<f64>,
    pub n_rows: usize,
    pub n_agents: usize,
    pub n_treated: usize,
    pub skipped_reason: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct StandardizationReport {
    pub di_mean: f64,
    pub di_sd: f64,
    pub basis: ZBasis,
    pub n_posts: usize,
    pub n_rows: usize,
}

/// Consolidated pipeline report mirroring the headline quantities.
#[derive(Debug, Serialize)]
pub struct FullReport {
    pub archive_stats: ArchiveStats,
    pub di_positive_share: f64,
    pub label_frequencies: LabelFrequencies,
    pub standardization: StandardizationReport,
    pub binned: Vec<BinnedEstimate>,
    pub binned_slope: f64,
    pub simple_fit: LogisticFit,
    pub glmm_fit: GlmmFit,
    pub gee_fit: GeeFit,
    pub permutation_simple: PermutationSummary,
    pub permutation_binned: PermutationSummary,
    pub event_aligned: EventAlignedReport,
    pub fixed_effects: Vec<FeReport>,
    pub strata: StrataTable,
    pub params: ReportParams,
}

/// Artifacts behind the three figures, for the plot-data CSV writers.
#[derive(Debug)]
pub struct ReportArtifacts {
    pub bins: Vec<BinnedEstimate>,
    pub perm_simple: PermutationResult,
    pub perm_binned: PermutationResult,
    pub alignment: EventAlignment,
}

pub fn run_report(
    posts: &[PostRecord],
    comments: &[CommentRecord],
    lexicon: &Lexicon,
    rules: &RuleSet,
    params: &ReportParams,
) -> Result<(FullReport, ReportArtifacts), PipelineError> {
    if posts.is_empty() {
        return Err(PipelineError::EmptyArchive("no posts".into()));
    }
    let threads = build_threads(posts, comments);
    let archive_stats = archive_summary(posts, comments);

    let post_scores = score_posts(posts, lexicon, params.count_mode);
    let comment_scores = score_comments(comments, lexicon, params.count_mode);
    let di_positive_share =
        post_scores.iter().filter(|s| s.di > 0).count() as f64 / post_scores.len() as f64;

    let (labels, label_frequencies) = classify_all(comments, rules);

    let sample = build_sample(&post_scores, &labels, comments, params.z_basis)?;
    let binned = bin_corrective_probability(&sample, params.bins, params.alpha)?;
    let slope = binned_slope(&binned)?;
    let simple_fit = fit_logistic_simple(&sample)?;
    let glmm_fit = fit_glmm_laplace(&sample)?;
    let gee_fit = fit_gee_exchangeable(&sample)?;
    let (perm_simple, perm_binned) =
        permutation_null_test(&sample, params.perms, params.seed, params.bins)?;

    let label_map = labels_by_id(&labels);
    let mut alignment =
        event_aligned_deltas(&threads, &label_map, &comment_scores, params.window_hours);
    let fixed_n_deltas: Vec<f64> = {
        fixed_n_comparison(&mut alignment.regulatable, params.fixed_n);
        alignment
            .regulatable
            .iter()
            .filter_map(|t| t.fixed_n_delta)
            .collect()
    };
    let deltas: Vec<f64> = alignment.regulatable.iter().map(|t| t.delta_mean).collect();
    let boot = |values: &[f64], estimand: Estimand| -> Option<BootstrapSummary> {
        if values.is_empty() {
            return None;
        }
        bootstrap_percentile(values, estimand, params.resamples, params.alpha, params.seed)
            .ok()
            .map(|r| BootstrapSummary {
                point: r.point,
                ci_lo: r.ci_lo,
                ci_hi: r.ci_hi,
            })
    };
    let event_aligned = EventAlignedReport {
        n_candidate_threads: alignment.n_candidate_threads,
        n_regulatable: alignment.regulatable.len(),
        n_excluded: alignment.excluded.len(),
        mean_delta: boot(&deltas, Estimand::MeanDelta),
        median_delta: boot(&deltas, Estimand::MedianDelta),
        fixed_n: params.fixed_n,
        fixed_n_median: boot(&fixed_n_deltas, Estimand::MedianDelta),
    };

    let events = resolve_fe_events(&threads, &label_map);
    let all_scores: Vec<DirectiveScore> = post_scores
        .iter()
        .chain(comment_scores.iter())
        .cloned()
        .collect();
    let fixed_effects: Vec<FeReport> = params
        .m_values
        .iter()
        .map(|&m| {
            let panel =
                build_fe_panel(&events, posts, comments, &all_scores, m, FeOutcome::Di, true);
            match fit_within_fe(&panel) {
                Ok(fit) => FeReport {
                    m,
                    beta: Some(fit.beta),
                    se: fit.se,
                    n_rows: fit.n_rows,
                    n_agents: fit.n_agents,
                    n_treated: fit.n_treated,
                    skipped_reason: None,
                },
                Err(e) => FeReport {
                    m,
                    beta: None,
                    se: None,
                    n_rows: panel.len(),
                    n_agents: 0,
                    n_treated: panel.iter().filter(|r| r.treated).count(),
                    skipped_reason: Some(e.to_string()),
                },
            }
        })
        .collect();

    let strata = stratify_and_compare(
        &threads,
        &label_map,
        &post_scores,
        &comment_scores,
        params.e_comments,
        params.h_hours,
        params.esc_threshold,
    );

    let report = FullReport {
        archive_stats,
        di_positive_share,
        label_frequencies,
        standardization: StandardizationReport {
            di_mean: sample.di_mean,
            di_sd: sample.di_sd,
            basis: sample.basis,
            n_posts: sample.n_posts,
            n_rows: sample.rows.len(),
        },
        binned: binned.clone(),
        binned_slope: slope,
        simple_fit,
        glmm_fit,
        gee_fit,
        permutation_simple: PermutationSummary::from(&perm_simple),
        permutation_binned: PermutationSummary::from(&perm_binned),
        event_aligned,
        fixed_effects,
        strata,
        params: params.clone(),
    };
    Ok((
        report,
        ReportArtifacts {
            bins: binned,
            perm_simple,
            perm_binned,
            alignment,
        },
    ))
}

#[derive(Debug, Clone, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

/// Reproducibility manifest written alongside every command's outputs.
/// Contains no wall-clock state, so reruns with identical inputs produce
/// byte-identical manifests.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub flags: BTreeMap<String, String>,
    pub inputs: Vec<InputDigest>,
    pub seed: Option<u64>,
    pub version: String,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        RunManifest {
            command: command.to_string(),
            flags: BTreeMap::new(),
            inputs: Vec::new(),
            seed: None,
            version: env!("CARGO_PKG_VERSION").to_string(),
            outputs: Vec::new(),
        }
    }

    pub fn flag(mut self, key: &str, value: impl ToString) -> Self {
        self.flags.insert(key.to_string(), value.to_string());
        self
    }

    pub fn input(mut self, path: &Path) -> Result<Self, std::io::Error> {
        let bytes = std::fs::read(path)?;
        let digest = Sha256::digest(&bytes);
        let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
        self.inputs.push(InputDigest {
            path: path.display().to_string(),
            sha256: hex,
        });
        Ok(self)
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn output(mut self, name: &str) -> Self {
        self.outputs.push(name.to_string());
        self.outputs.sort();
        self
    }

    pub fn write(&self, dir: &Path) -> Result<(), std::io::Error> {
        let mut json = serde_json::to_string_pretty(self)?;
        json.push('\n');
        std::fs::write(dir.join("manifest.json"), json)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate_archive, SynthConfig};

    #[test]
    fn report_runs_end_to_end_on_synth_archive() {
        let config = SynthConfig::example(19);
        let archive = generate_archive(&config).unwrap();
        let mut params = ReportParams {
            perms: 60,
            resamples: 200,
            ..ReportParams::default()
        };
        params.seed = 5;
        let (report, artifacts) = run_report(
            &archive.posts,
            &archive.comments,
            &Lexicon::demo(),
            &RuleSet::demo(),
            &params,
        )
        .unwrap();
        assert_eq!(report.archive_stats.n_posts, config.n_posts);
        assert!(report.di_positive_share > 0.0 && report.di_positive_share < 1.0);
        assert_eq!(
            report.label_frequencies.total(),
            archive.comments.len()
        );
        assert!(report.glmm_fit.converged);
        assert!(artifacts.perm_simple.null_draws.len() <= 60);
        // serializes cleanly
        let json = serde_json::to_string(&report).unwrap();
        assert!(json.contains("glmm_fit"));
    }

    #[test]
    fn empty_archive_is_rejected() {
        let err = run_report(
            &[],
            &[],
            &Lexicon::demo(),
            &RuleSet::demo(),
            &ReportParams::default(),
        )
        .unwrap_err();
        assert!(matches!(err, PipelineError::EmptyArchive(_)));
    }
}
