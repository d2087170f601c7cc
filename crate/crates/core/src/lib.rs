//! threadgauge: measurement and inference for agent conversation archives.
//!
//! The crate ingests post/comment archives, scores directive intensity
//! against an auditable regex lexicon, classifies replies into four
//! interaction types, and runs a statistical battery on the DI ->
//! corrective coupling: binned Wilson estimates, simple and
//! random-intercept logistic regression, GEE, permutation null tests,
//! percentile bootstrap, event-aligned within-thread deltas, within-agent
//! fixed effects, and coarse stratified comparisons. A seeded synthetic
//! archive generator with planted effects validates every estimator end
//! to end.

pub mod archive;
pub mod classifier;
pub mod inference;
pub mod io;
pub mod lexicon;
pub mod longitudinal;
pub mod pipeline;
pub mod resampling;
pub mod synth;

pub use archive::{archive_summary, build_threads, parse_archive, ArchiveStats, Thread};
pub use classifier::{classify_all, InteractionType, RuleSet};
pub use lexicon::{CountMode, DirectiveScore, Lexicon};
pub use pipeline::{run_report, FullReport, ReportParams, RunManifest};
