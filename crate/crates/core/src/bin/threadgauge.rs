//! threadgauge command-line interface.
//!
//! Every subcommand writes its outputs plus a reproducibility manifest
//! into `--out DIR`. Randomness flows from `--seed`; internal parallelism
//! is bounded by `--jobs` (or the THREADGAUGE_JOBS environment variable)
//! without affecting results.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use threadgauge::archive::{self, parse_archive, ParsedArchive};
use threadgauge::classifier::{classify_all, labels_by_id, RuleSet};
use threadgauge::inference::{
    bin_corrective_probability, binned_slope, build_sample, fit_gee_exchangeable,
    fit_glmm_laplace, fit_logistic_simple, RegressionSample, ZBasis,
};
use threadgauge::io as tgio;
use threadgauge::lexicon::{score_comments, score_posts, CountMode, DirectiveScore, Lexicon};
use threadgauge::longitudinal::{
    build_fe_panel, event_aligned_deltas, fit_within_fe, fixed_n_comparison, resolve_fe_events,
    stratify_and_compare, FeOutcome,
};
use threadgauge::pipeline::{PipelineError, ReportParams, RunManifest};
use threadgauge::resampling::{bootstrap_percentile, permutation_null_test, Estimand};
use threadgauge::synth::{generate_archive, SynthConfig};

#[derive(Parser)]
#[command(name = "threadgauge", version, about = "Measurement and inference for agent conversation archives")]
struct Cli {
    /// Bound internal parallelism (defaults to THREADGAUGE_JOBS, then all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum CountModeArg {
    Patterns,
    Occurrences,
}

impl From<CountModeArg> for CountMode {
    fn from(m: CountModeArg) -> Self {
        match m {
            CountModeArg::Patterns => CountMode::Patterns,
            CountModeArg::Occurrences => CountMode::Occurrences,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ZBasisArg {
    Posts,
    Comments,
}

impl From<ZBasisArg> for ZBasis {
    fn from(b: ZBasisArg) -> Self {
        match b {
            ZBasisArg::Posts => ZBasis::Posts,
            ZBasisArg::Comments => ZBasis::Comments,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Simple,
    Glmm,
    Gee,
}

#[derive(Clone, Copy, ValueEnum)]
enum EstimandArg {
    Mean,
    Median,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutcomeArg {
    Di,
    DiPositive,
}

#[derive(Args)]
struct ArchiveInputs {
    /// Posts file (CSV with header or line-delimited JSON).
    #[arg(long)]
    posts: PathBuf,
    /// Comments file (CSV with header or line-delimited JSON).
    #[arg(long)]
    comments: PathBuf,
}

#[derive(Args)]
struct DerivedInputs {
    /// Per-item scores CSV produced by `score`.
    #[arg(long)]
    scores: PathBuf,
    /// Per-comment labels CSV produced by `classify`.
    #[arg(long)]
    labels: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Parse raw archives, validate integrity, write canonical files plus
    /// a diagnostics report.
    Ingest {
        #[command(flatten)]
        archive: ArchiveInputs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score directive intensity for posts and comments.
    Score {
        #[command(flatten)]
        archive: ArchiveInputs,
        #[arg(long)]
        lexicon: PathBuf,
        #[arg(long, default_value_t = 10)]
        cap: u32,
        #[arg(long, value_enum, default_value = "patterns")]
        count_mode: CountModeArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Classify comments into interaction types.
    Classify {
        #[command(flatten)]
        archive: ArchiveInputs,
        #[arg(long)]
        rules: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate the DI -> corrective coupling.
    Coupling {
        #[command(flatten)]
        archive: ArchiveInputs,
        #[command(flatten)]
        derived: DerivedInputs,
        #[arg(long, default_value_t = 4)]
        bins: usize,
        #[arg(long, value_enum, default_value = "glmm")]
        model: ModelArg,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, value_enum, default_value = "posts")]
        z_basis: ZBasisArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Permutation null test for both coupling statistics.
    Permtest {
        #[command(flatten)]
        archive: ArchiveInputs,
        #[command(flatten)]
        derived: DerivedInputs,
        #[arg(long, default_value_t = 1000)]
        perms: usize,
        #[arg(long, default_value_t = 4)]
        bins: usize,
        #[arg(long, value_enum, default_value = "posts")]
        z_basis: ZBasisArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Percentile bootstrap over a column of per-thread values.
    Bootstrap {
        /// One-column CSV of values.
        #[arg(long)]
        values: PathBuf,
        #[arg(long, value_enum, default_value = "mean")]
        estimand: EstimandArg,
        #[arg(long, default_value_t = 20000)]
        resamples: usize,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Event-aligned within-thread deltas around the first corrective
    /// response.
    EventAlign {
        #[command(flatten)]
        archive: ArchiveInputs,
        #[command(flatten)]
        derived: DerivedInputs,
        #[arg(long, default_value_t = 12.0)]
        window_hours: f64,
        #[arg(long, default_value_t = 5)]
        fixed_n: usize,
        #[arg(long, default_value_t = 20000)]
        resamples: usize,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Within-agent fixed-effects estimate around corrective events.
    Fe {
        #[command(flatten)]
        archive: ArchiveInputs,
        #[command(flatten)]
        derived: DerivedInputs,
        /// Treated-window sizes, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "5,10,20")]
        m: Vec<usize>,
        #[arg(long, value_enum, default_value = "di")]
        outcome: OutcomeArg,
        /// Drop events where an agent corrected itself.
        #[arg(long, default_value_t = false)]
        exclude_self_corrections: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Coarse stratified early-correction comparison.
    Strata {
        #[command(flatten)]
        archive: ArchiveInputs,
        #[command(flatten)]
        derived: DerivedInputs,
        #[arg(long, default_value_t = 5)]
        e: usize,
        #[arg(long, default_value_t = 6.0)]
        hours: f64,
        #[arg(long, default_value_t = 3)]
        esc_threshold: u32,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic archive with planted effects.
    Synth {
        /// JSON configuration file.
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the full pipeline and emit one consolidated report.
    Report {
        #[command(flatten)]
        archive: ArchiveInputs,
        #[arg(long)]
        lexicon: PathBuf,
        #[arg(long)]
        rules: PathBuf,
        #[arg(long, default_value_t = 10)]
        cap: u32,
        #[arg(long, value_enum, default_value = "patterns")]
        count_mode: CountModeArg,
        #[arg(long, value_enum, default_value = "posts")]
        z_basis: ZBasisArg,
        #[arg(long, default_value_t = 4)]
        bins: usize,
        #[arg(long, default_value_t = 1000)]
        perms: usize,
        #[arg(long, default_value_t = 20000)]
        resamples: usize,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, default_value_t = 12.0)]
        window_hours: f64,
        #[arg(long, default_value_t = 5)]
        fixed_n: usize,
        #[arg(long, value_delimiter = ',', default_value = "5,10,20")]
        m: Vec<usize>,
        #[arg(long, default_value_t = 5)]
        e: usize,
        #[arg(long, default_value_t = 6.0)]
        hours: f64,
        #[arg(long, default_value_t = 3)]
        esc_threshold: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug)]
enum CliError {
    Io(String),
    Schema(String),
    Compute(String),
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Io(_) => "io",
            CliError::Schema(_) => "schema",
            CliError::Compute(_) => "compute",
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Io(m) | CliError::Schema(m) | CliError::Compute(m) => m,
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 3,
            CliError::Schema(_) => 4,
            CliError::Compute(_) => 5,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Io(inner) => CliError::Io(inner.to_string()),
            PipelineError::Archive(archive::ArchiveError::Io(inner)) => {
                CliError::Io(inner.to_string())
            }
            PipelineError::DerivedIo(tgio::IoError::Io(inner)) => CliError::Io(inner.to_string()),
            PipelineError::Archive(_)
            | PipelineError::Lexicon(_)
            | PipelineError::Rules(_)
            | PipelineError::DerivedIo(_)
            | PipelineError::EmptyArchive(_) => CliError::Schema(e.to_string()),
            PipelineError::Fit(_) | PipelineError::Resample(_) | PipelineError::Synth(_) => {
                CliError::Compute(e.to_string())
            }
        }
    }
}

fn open(path: &Path) -> Result<File, CliError> {
    File::open(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    Ok(BufWriter::new(File::create(path).map_err(|e| {
        CliError::Io(format!("{}: {e}", path.display()))
    })?))
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Compute(format!("serialization: {e}")))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(())
}

fn load_archive(inputs: &ArchiveInputs) -> Result<ParsedArchive, CliError> {
    let parsed = parse_archive(open(&inputs.posts)?, open(&inputs.comments)?)
        .map_err(PipelineError::Archive)?;
    Ok(parsed)
}

fn load_lexicon(path: &Path, cap: u32) -> Result<Lexicon, CliError> {
    Ok(Lexicon::from_csv_reader(open(path)?, cap).map_err(PipelineError::Lexicon)?)
}

fn load_rules(path: &Path) -> Result<RuleSet, CliError> {
    Ok(RuleSet::from_csv_reader(open(path)?).map_err(PipelineError::Rules)?)
}

fn load_derived(
    derived: &DerivedInputs,
) -> Result<(Vec<DirectiveScore>, Vec<threadgauge::classifier::ClassifiedComment>), CliError> {
    let scores = tgio::read_scores_csv(open(&derived.scores)?, &derived.scores.display().to_string())
        .map_err(PipelineError::DerivedIo)?;
    let labels = tgio::read_labels_csv(open(&derived.labels)?, &derived.labels.display().to_string())
        .map_err(PipelineError::DerivedIo)?;
    Ok((scores, labels))
}

fn sample_from_inputs(
    archive: &ParsedArchive,
    scores: &[DirectiveScore],
    labels: &[threadgauge::classifier::ClassifiedComment],
    z_basis: ZBasis,
) -> Result<RegressionSample, CliError> {
    Ok(build_sample(scores, labels, &archive.comments, z_basis).map_err(PipelineError::Fit)?)
}

fn ensure_out_dir(out: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(out)
        .map_err(|e| CliError::Io(format!("{}: {e}", out.display())))
}

fn init_rayon(jobs: Option<usize>) {
    let jobs = jobs.or_else(|| {
        std::env::var("THREADGAUGE_JOBS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(n) = jobs {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Ingest { archive: inputs, out } => {
            ensure_out_dir(&out)?;
            let parsed = load_archive(&inputs)?;
            archive::write_posts_csv(create(&out.join("posts.csv"))?, &parsed.posts)
                .map_err(PipelineError::Archive)?;
            archive::write_comments_csv(create(&out.join("comments.csv"))?, &parsed.comments)
                .map_err(PipelineError::Archive)?;
            archive::write_comments_csv(create(&out.join("quarantine.csv"))?, &parsed.quarantined)
                .map_err(PipelineError::Archive)?;
            let stats = archive::archive_summary(&parsed.posts, &parsed.comments);
            write_json(
                &out.join("diagnostics.json"),
                &json!({
                    "stats": stats,
                    "n_quarantined": parsed.quarantined.len(),
                    "diagnostics": parsed.diagnostics,
                }),
            )?;
            RunManifest::new("ingest")
                .input(&inputs.posts)?
                .input(&inputs.comments)?
                .output("posts.csv")
                .output("comments.csv")
                .output("quarantine.csv")
                .output("diagnostics.json")
                .write(&out)?;
            println!(
                "ingested {} posts, {} comments, {} agents ({} quarantined, {} diagnostics)",
                stats.n_posts,
                stats.n_comments,
                stats.n_agents,
                parsed.quarantined.len(),
                parsed.diagnostics.len()
            );
            Ok(())
        }
        Command::Score {
            archive: inputs,
            lexicon,
            cap,
            count_mode,
            out,
        } => {
            ensure_out_dir(&out)?;
            let parsed = load_archive(&inputs)?;
            let lex = load_lexicon(&lexicon, cap)?;
            let mode = CountMode::from(count_mode);
            let mut scores = score_posts(&parsed.posts, &lex, mode);
            scores.extend(score_comments(&parsed.comments, &lex, mode));
            tgio::write_scores_csv(create(&out.join("scores.csv"))?, &scores)
                .map_err(PipelineError::DerivedIo)?;
            let (a, s) = lex.counts();
            RunManifest::new("score")
                .input(&inputs.posts)?
                .input(&inputs.comments)?
                .input(&lexicon)?
                .flag("cap", cap)
                .flag("count_mode", if matches!(mode, CountMode::Patterns) { "patterns" } else { "occurrences" })
                .output("scores.csv")
                .write(&out)?;
            println!(
                "scored {} items against {} patterns ({a} action, {s} sensitive)",
                scores.len(),
                a + s
            );
            Ok(())
        }
        Command::Classify {
            archive: inputs,
            rules,
            out,
        } => {
            ensure_out_dir(&out)?;
            let parsed = load_archive(&inputs)?;
            let ruleset = load_rules(&rules)?;
            let (labels, freq) = classify_all(&parsed.comments, &ruleset);
            tgio::write_labels_csv(create(&out.join("labels.csv"))?, &labels)
                .map_err(PipelineError::DerivedIo)?;
            write_json(&out.join("label_frequencies.json"), &freq)?;
            RunManifest::new("classify")
                .input(&inputs.posts)?
                .input(&inputs.comments)?
                .input(&rules)?
                .output("labels.csv")
                .output("label_frequencies.json")
                .write(&out)?;
            println!(
                "classified {} comments: {} adverse, {} corrective, {} affirmation, {} neutral",
                freq.total(),
                freq.adverse,
                freq.corrective,
                freq.affirmation,
                freq.neutral
            );
            Ok(())
        }
        Command::Coupling {
            archive: inputs,
            derived,
            bins,
            model,
            alpha,
            z_basis,
            out,
        } => {
            ensure_out_dir(&out)?;
            let parsed = load_archive(&inputs)?;
            let (scores, labels) = load_derived(&derived)?;
            let sample = sample_from_inputs(&parsed, &scores, &labels, z_basis.into())?;
            let binned =
                bin_corrective_probability(&sample, bins, alpha).map_err(PipelineError::Fit)?;
            if binned.len() == 1 {
                eprintln!("warning: no DI>0 rows; only the DI=0 bin was emitted");
            }
            let slope = binned_slope(&binned).map_err(PipelineError::Fit)?;
            tgio::write_bins_csv(create(&out.join("bins.csv"))?, &binned)
                .map_err(PipelineError::DerivedIo)?;
            let fit_json = match model {
                ModelArg::Simple => serde_json::to_value(
                    fit_logistic_simple(&sample).map_err(PipelineError::Fit)?,
                ),
                ModelArg::Glmm => serde_json::to_value(
                    fit_glmm_laplace(&sample).map_err(PipelineError::Fit)?,
                ),
                ModelArg::Gee => serde_json::to_value(
                    fit_gee_exchangeable(&sample).map_err(PipelineError::Fit)?,
                ),
            }
            .map_err(|e| CliError::Compute(e.to_string()))?;
            write_json(
                &out.join("coupling.json"),
                &json!({
                    "model": match model {
                        ModelArg::Simple => "simple",
                        ModelArg::Glmm => "glmm",
                        ModelArg::Gee => "gee",
                    },
                    "fit": fit_json,
                    "binned_slope": slope,
                    "standardization": {
                        "di_mean": sample.di_mean,
                        "di_sd": sample.di_sd,
                        "n_posts": sample.n_posts,
                        "n_rows": sample.rows.len(),
                    },
                }),
            )?;
            RunManifest::new("coupling")
                .input(&inputs.posts)?
                .input(&inputs.comments)?
                .input(&derived.scores)?
                .input(&derived.labels)?
                .flag("bins", bins)
                .flag("alpha", alpha)
                .output("coupling.json")
                .output("bins.csv")
                .write(&out)?;
            println!("coupling report written to {}", out.display());
            Ok(())
        }
        Command::Permtest {
            archive: inputs,
            derived,
            perms,
            bins,
            z_basis,
            seed,
            out,
        } => {
            ensure_out_dir(&out)?;
            let parsed = load_archive(&inputs)?;
            let (scores, labels) = load_derived(&derived)?;
            let sample = sample_from_inputs(&parsed, &scores, &labels, z_basis.into())?;
            let (simple, binned) = permutation_null_test(&sample, perms, seed, bins)
                .map_err(PipelineError::Resample)?;
            tgio::write_perm_csv(create(&out.join("perm_null.csv"))?, &[&simple, &binned])
                .map_err(PipelineError::DerivedIo)?;
            write_json(&out.join("permtest.json"), &json!({ "simple": simple, "binned": binned }))?;
            RunManifest::new("permtest")
                .input(&inputs.posts)?
                .input(&inputs.comments)?
                .input(&derived.scores)?
                .input(&derived.labels)?
                .flag("perms", perms)
                .flag("bins", bins)
                .seed(seed)
                .output("permtest.json")
                .output("perm_null.csv")
                .write(&out)?;
            println!("permutation test written to {}", out.display());
            Ok(())
        }
        Command::Bootstrap {
            values,
            estimand,
            resamples,
            alpha,
            seed,
            out,
        } => {
            ensure_out_dir(&out)?;
            let data = tgio::read_values_csv(open(&values)?, &values.display().to_string())
                .map_err(PipelineError::DerivedIo)?;
            let est = match estimand {
                EstimandArg::Mean => Estimand::MeanDelta,
                EstimandArg::Median => Estimand::MedianDelta,
            };
            let result = bootstrap_percentile(&data, est, resamples, alpha, seed)
                .map_err(PipelineError::Resample)?;
            write_json(&out.join("bootstrap.json"), &result)?;
            RunManifest::new("bootstrap")
                .input(&values)?
                .flag("estimand", match estimand {
                    EstimandArg::Mean => "mean",
                    EstimandArg::Median => "median",
                })
                .flag("resamples", resamples)
                .flag("alpha", alpha)
                .seed(seed)
                .output("bootstrap.json")
                .write(&out)?;
            println!(
                "bootstrap: point {:.6}, 95% CI [{:.6}, {:.6}]",
                result.point, result.ci_lo, result.ci_hi
            );
            Ok(())
        }
        Command::EventAlign {
            archive: inputs,
            derived,
            window_hours,
            fixed_n,
            resamples,
            alpha,
            seed,
            out,
        } => {
            ensure_out_dir(&out)?;
            let parsed = load_archive(&inputs)?;
            let (scores, labels) = load_derived(&derived)?;
            let threads = archive::build_threads(&parsed.posts, &parsed.comments);
            let label_map = labels_by_id(&labels);
            let comment_scores: Vec<DirectiveScore> = scores
                .iter()
                .filter(|s| s.kind == threadgauge::lexicon::ItemKind::Comment)
                .cloned()
                .collect();
            let mut alignment =
                event_aligned_deltas(&threads, &label_map, &comment_scores, window_hours);
            fixed_n_comparison(&mut alignment.regulatable, fixed_n);
            tgio::write_event_deltas_csv(create(&out.join("event_deltas.csv"))?, &alignment)
                .map_err(PipelineError::DerivedIo)?;
            let deltas: Vec<f64> = alignment.regulatable.iter().map(|t| t.delta_mean).collect();
            let fixed_deltas: Vec<f64> = alignment
                .regulatable
                .iter()
                .filter_map(|t| t.fixed_n_delta)
                .collect();
            let boot = |vals: &[f64], est: Estimand| {
                if vals.is_empty() {
                    None
                } else {
                    bootstrap_percentile(vals, est, resamples, alpha, seed).ok()
                }
            };
            write_json(
                &out.join("event_align.json"),
                &json!({
                    "n_candidate_threads": alignment.n_candidate_threads,
                    "n_regulatable": alignment.regulatable.len(),
                    "n_excluded": alignment.excluded.len(),
                    "mean_delta": boot(&deltas, Estimand::MeanDelta),
                    "median_delta": boot(&deltas, Estimand::MedianDelta),
                    "fixed_n": fixed_n,
                    "fixed_n_median": boot(&fixed_deltas, Estimand::MedianDelta),
                }),
            )?;
            RunManifest::new("event-align")
                .input(&inputs.posts)?
                .input(&inputs.comments)?
                .input(&derived.scores)?
                .input(&derived.labels)?
                .flag("window_hours", window_hours)
                .flag("fixed_n", fixed_n)
                .flag("resamples", resamples)
                .flag("alpha", alpha)
                .seed(seed)
                .output("event_align.json")
                .output("event_deltas.csv")
                .write(&out)?;
            println!(
                "event alignment: {} regulatable of {} candidate threads",
                alignment.regulatable.len(),
                alignment.n_candidate_threads
            );
            Ok(())
        }
        Command::Fe {
            archive: inputs,
            derived,
            m,
            outcome,
            exclude_self_corrections,
            out,
        } => {
            ensure_out_dir(&out)?;
            let parsed = load_archive(&inputs)?;
            let (scores, labels) = load_derived(&derived)?;
            let threads = archive::build_threads(&parsed.posts, &parsed.comments);
            let label_map = labels_by_id(&labels);
            let events = resolve_fe_events(&threads, &label_map);
            let outcome = match outcome {
                OutcomeArg::Di => FeOutcome::Di,
                OutcomeArg::DiPositive => FeOutcome::DiPositive,
            };
            let mut per_m = Vec::new();
            let mut manifest = RunManifest::new("fe")
                .input(&inputs.posts)?
                .input(&inputs.comments)?
                .input(&derived.scores)?
                .input(&derived.labels)?
                .flag("m", m.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","))
                .output("fe.json");
            for &m_value in &m {
                let panel = build_fe_panel(
                    &events,
                    &parsed.posts,
                    &parsed.comments,
                    &scores,
                    m_value,
                    outcome,
                    !exclude_self_corrections,
                );
                let name = format!("fe_panel_m{m_value}.csv");
                tgio::write_fe_panel_csv(create(&out.join(&name))?, &panel)
                    .map_err(PipelineError::DerivedIo)?;
                manifest = manifest.output(&name);
                match fit_within_fe(&panel) {
                    Ok(fit) => per_m.push(json!({
                        "m": m_value,
                        "beta": fit.beta,
                        "se": fit.se,
                        "n_rows": fit.n_rows,
                        "n_agents": fit.n_agents,
                        "n_treated": fit.n_treated,
                    })),
                    Err(e) => per_m.push(json!({
                        "m": m_value,
                        "beta": null,
                        "skipped_reason": e.to_string(),
                        "n_rows": panel.len(),
                    })),
                }
            }
            write_json(
                &out.join("fe.json"),
                &json!({ "n_events": events.len(), "per_m": per_m }),
            )?;
            manifest.write(&out)?;
            println!("fixed-effects estimates written to {}", out.display());
            Ok(())
        }
        Command::Strata {
            archive: inputs,
            derived,
            e,
            hours,
            esc_threshold,
            out,
        } => {
            ensure_out_dir(&out)?;
            let parsed = load_archive(&inputs)?;
            let (scores, labels) = load_derived(&derived)?;
            let threads = archive::build_threads(&parsed.posts, &parsed.comments);
            let label_map = labels_by_id(&labels);
            let post_scores: Vec<DirectiveScore> = scores
                .iter()
                .filter(|s| s.kind == threadgauge::lexicon::ItemKind::Post)
                .cloned()
                .collect();
            let comment_scores: Vec<DirectiveScore> = scores
                .iter()
                .filter(|s| s.kind == threadgauge::lexicon::ItemKind::Comment)
                .cloned()
                .collect();
            let table = stratify_and_compare(
                &threads,
                &label_map,
                &post_scores,
                &comment_scores,
                e,
                hours,
                esc_threshold,
            );
            tgio::write_strata_csv(create(&out.join("strata.csv"))?, &table)
                .map_err(PipelineError::DerivedIo)?;
            RunManifest::new("strata")
                .input(&inputs.posts)?
                .input(&inputs.comments)?
                .input(&derived.scores)?
                .input(&derived.labels)?
                .flag("e", e)
                .flag("hours", hours)
                .flag("esc_threshold", esc_threshold)
                .output("strata.csv")
                .write(&out)?;
            println!(
                "strata table over {} eligible threads written to {}",
                table.n_eligible,
                out.display()
            );
            Ok(())
        }
        Command::Synth { config, out } => {
            ensure_out_dir(&out)?;
            let text = std::fs::read_to_string(&config)
                .map_err(|e| CliError::Io(format!("{}: {e}", config.display())))?;
            let cfg: SynthConfig = serde_json::from_str(&text)
                .map_err(|e| CliError::Schema(format!("{}: {e}", config.display())))?;
            let archive_out = generate_archive(&cfg).map_err(PipelineError::Synth)?;
            archive::write_posts_csv(create(&out.join("posts.csv"))?, &archive_out.posts)
                .map_err(PipelineError::Archive)?;
            archive::write_comments_csv(create(&out.join("comments.csv"))?, &archive_out.comments)
                .map_err(PipelineError::Archive)?;
            std::fs::write(out.join("lexicon.csv"), threadgauge::lexicon::DEMO_LEXICON_CSV)?;
            std::fs::write(out.join("rules.csv"), threadgauge::classifier::DEMO_RULES_CSV)?;
            write_json(&out.join("ground_truth.json"), &archive_out.ground_truth)?;
            RunManifest::new("synth")
                .input(&config)?
                .seed(cfg.seed)
                .output("posts.csv")
                .output("comments.csv")
                .output("lexicon.csv")
                .output("rules.csv")
                .output("ground_truth.json")
                .write(&out)?;
            println!(
                "synthesized {} posts, {} comments into {}",
                archive_out.posts.len(),
                archive_out.comments.len(),
                out.display()
            );
            Ok(())
        }
        Command::Report {
            archive: inputs,
            lexicon,
            rules,
            cap,
            count_mode,
            z_basis,
            bins,
            perms,
            resamples,
            alpha,
            window_hours,
            fixed_n,
            m,
            e,
            hours,
            esc_threshold,
            seed,
            out,
        } => {
            ensure_out_dir(&out)?;
            let parsed = load_archive(&inputs)?;
            let lex = load_lexicon(&lexicon, cap)?;
            let ruleset = load_rules(&rules)?;
            let params = ReportParams {
                cap,
                count_mode: count_mode.into(),
                z_basis: z_basis.into(),
                bins,
                perms,
                resamples,
                alpha,
                window_hours,
                fixed_n,
                m_values: m,
                e_comments: e,
                h_hours: hours,
                esc_threshold,
                seed,
            };
            let (report, artifacts) =
                threadgauge::pipeline::run_report(&parsed.posts, &parsed.comments, &lex, &ruleset, &params)?;
            write_json(&out.join("report.json"), &report)?;
            tgio::write_bins_csv(create(&out.join("bins.csv"))?, &artifacts.bins)
                .map_err(PipelineError::DerivedIo)?;
            tgio::write_perm_csv(
                create(&out.join("perm_null.csv"))?,
                &[&artifacts.perm_simple, &artifacts.perm_binned],
            )
            .map_err(PipelineError::DerivedIo)?;
            tgio::write_event_deltas_csv(
                create(&out.join("event_deltas.csv"))?,
                &artifacts.alignment,
            )
            .map_err(PipelineError::DerivedIo)?;
            tgio::write_strata_csv(create(&out.join("strata.csv"))?, &report.strata)
                .map_err(PipelineError::DerivedIo)?;
            RunManifest::new("report")
                .input(&inputs.posts)?
                .input(&inputs.comments)?
                .input(&lexicon)?
                .input(&rules)?
                .flag("cap", cap)
                .flag("bins", bins)
                .flag("perms", perms)
                .flag("resamples", resamples)
                .flag("alpha", alpha)
                .flag("window_hours", window_hours)
                .flag("fixed_n", fixed_n)
                .flag("e", e)
                .flag("hours", hours)
                .flag("esc_threshold", esc_threshold)
                .seed(seed)
                .output("report.json")
                .output("bins.csv")
                .output("perm_null.csv")
                .output("event_deltas.csv")
                .output("strata.csv")
                .write(&out)?;
            println!(
                "report: beta_simple {:.4}, glmm beta {:.4} (OR {:.3}), p_perm {:.5}, {} regulatable threads",
                report.simple_fit.beta,
                report.glmm_fit.beta,
                report.glmm_fit.or_beta,
                report.permutation_simple.p_two_sided,
                report.event_aligned.n_regulatable
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_rayon(cli.jobs);
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!(
                "{}",
                json!({ "error_kind": e.kind(), "message": e.message() })
            );
            ExitCode::from(e.exit_code())
        }
    }
}
