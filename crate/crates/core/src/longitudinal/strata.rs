//! Coarse stratified early-correction comparison.
//!
//! Eligible threads (posts with at least one labeled comment) are
//! stratified by post-DI bin (0 vs > 0), early engagement volume tercile
//! (comments within the first H hours, terciles over all eligible threads,
//! ties to the lower tercile), and early max comment-DI bin over the first
//! E comments. Within each stratum, threads flagged early-corrected are
//! compared to the rest on downstream escalation: `esc_high` indicates any
//! comment after the first E reaching DI >= the escalation threshold.

use std::collections::HashMap;

use chrono::Duration;
use serde::Serialize;

use crate::archive::Thread;
use crate::classifier::InteractionType;
use crate::lexicon::DirectiveScore;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EarlyFlag {
    /// Corrective among the first E comments.
    ByCount,
    /// Corrective within H hours of the post time.
    ByTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct ThreadStratum {
    /// false: post DI = 0; true: post DI > 0
    pub di_positive: bool,
    /// 1..=3
    pub engagement_tercile: u8,
    /// max comment DI over the first E comments is > 0
    pub early_max_di_positive: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ThreadSummary {
    pub post_id: String,
    pub stratum: ThreadStratum,
    pub early_by_count: bool,
    pub early_by_time: bool,
    pub esc_high: bool,
    pub n_downstream: usize,
    pub downstream_max_di: Option<u32>,
    pub downstream_mean_di: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct StratumCell {
    pub stratum: ThreadStratum,
    pub flag: EarlyFlag,
    pub flag_value: bool,
    pub n_threads: usize,
    pub mean_esc_high: Option<f64>,
    /// Means over threads that have a downstream segment.
    pub n_downstream_threads: usize,
    pub mean_downstream_max_di: Option<f64>,
    pub mean_downstream_mean_di: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct StrataTable {
    pub threads: Vec<ThreadSummary>,
    pub cells: Vec<StratumCell>,
    pub n_eligible: usize,
    /// Engagement counts at the tercile edges.
    pub tercile_edges: (usize, usize),
}

/// Nearest-rank tercile edges; values at or below an edge fall in the
/// lower tercile.
fn tercile_edges(mut counts: Vec<usize>) -> (usize, usize) {
    counts.sort_unstable();
    let n = counts.len();
    let at = |q_num: usize| counts[((q_num * n).div_ceil(3)).max(1) - 1];
    (at(1), at(2))
}

pub fn stratify_and_compare(
    threads: &[Thread],
    labels: &HashMap<&str, InteractionType>,
    post_scores: &[DirectiveScore],
    comment_scores: &[DirectiveScore],
    e_comments: usize,
    h_hours: f64,
    esc_threshold: u32,
) -> StrataTable {
    let post_di: HashMap<&str, u32> = post_scores
        .iter()
        .map(|s| (s.item_id.as_str(), s.di))
        .collect();
    let comment_di: HashMap<&str, u32> = comment_scores
        .iter()
        .map(|s| (s.item_id.as_str(), s.di))
        .collect();
    let h = Duration::milliseconds((h_hours * 3_600_000.0).round() as i64);

    let eligible: Vec<&Thread> = threads.iter().filter(|t| !t.comments.is_empty()).collect();
    let engagement: Vec<usize> = eligible
        .iter()
        .map(|t| {
            t.comments
                .iter()
                .filter(|c| c.created_at <= t.post.created_at + h)
                .count()
        })
        .collect();
    if eligible.is_empty() {
        return StrataTable {
            threads: Vec::new(),
            cells: Vec::new(),
            n_eligible: 0,
            tercile_edges: (0, 0),
        };
    }
    let (e1, e2) = tercile_edges(engagement.clone());

    let summaries: Vec<ThreadSummary> = eligible
        .iter()
        .zip(&engagement)
        .map(|(t, &eng)| {
            let di = |c: &crate::archive::CommentRecord| {
                comment_di.get(c.comment_id.as_str()).copied().unwrap_or(0)
            };
            let early = &t.comments[..e_comments.min(t.comments.len())];
            let downstream = &t.comments[e_comments.min(t.comments.len())..];
            let early_max_di = early.iter().map(di).max().unwrap_or(0);
            let downstream_max_di = downstream.iter().map(di).max();
            let downstream_mean_di = if downstream.is_empty() {
                None
            } else {
                Some(
                    downstream.iter().map(|c| f64::from(di(c))).sum::<f64>()
                        / downstream.len() as f64,
                )
            };
            let is_corrective = |c: &crate::archive::CommentRecord| {
                labels.get(c.comment_id.as_str()) == Some(&InteractionType::Corrective)
            };
            ThreadSummary {
                post_id: t.post.post_id.clone(),
                stratum: ThreadStratum {
                    di_positive: post_di.get(t.post.post_id.as_str()).copied().unwrap_or(0) > 0,
                    engagement_tercile: if eng <= e1 {
                        1
                    } else if eng <= e2 {
                        2
                    } else {
                        3
                    },
                    early_max_di_positive: early_max_di > 0,
                },
                early_by_count: early.iter().any(is_corrective),
                early_by_time: t
                    .comments
                    .iter()
                    .filter(|c| c.created_at <= t.post.created_at + h)
                    .any(is_corrective),
                // empty downstream counts as no escalation observed
                esc_high: downstream_max_di.is_some_and(|m| m >= esc_threshold),
                n_downstream: downstream.len(),
                downstream_max_di,
                downstream_mean_di,
            }
        })
        .collect();

    let mut cells = Vec::new();
    for di_positive in [false, true] {
        for tercile in 1u8..=3 {
            for early_max in [false, true] {
                let stratum = ThreadStratum {
                    di_positive,
                    engagement_tercile: tercile,
                    early_max_di_positive: early_max,
                };
                for flag in [EarlyFlag::ByCount, EarlyFlag::ByTime] {
                    for flag_value in [false, true] {
                        let members: Vec<&ThreadSummary> = summaries
                            .iter()
                            .filter(|s| s.stratum == stratum)
                            .filter(|s| {
                                flag_value
                                    == match flag {
                                        EarlyFlag::ByCount => s.early_by_count,
                                        EarlyFlag::ByTime => s.early_by_time,
                                    }
                            })
                            .collect();
                        let n = members.len();
                        let with_downstream: Vec<&&ThreadSummary> =
                            members.iter().filter(|s| s.n_downstream > 0).collect();
                        cells.push(StratumCell {
                            stratum,
                            flag,
                            flag_value,
                            n_threads: n,
                            mean_esc_high: (n > 0).then(|| {
                                members.iter().filter(|s| s.esc_high).count() as f64 / n as f64
                            }),
                            n_downstream_threads: with_downstream.len(),
                            mean_downstream_max_di: (!with_downstream.is_empty()).then(|| {
                                with_downstream
                                    .iter()
                                    .map(|s| f64::from(s.downstream_max_di.unwrap()))
                                    .sum::<f64>()
                                    / with_downstream.len() as f64
                            }),
                            mean_downstream_mean_di: (!with_downstream.is_empty()).then(|| {
                                with_downstream
                                    .iter()
                                    .map(|s| s.downstream_mean_di.unwrap())
                                    .sum::<f64>()
                                    / with_downstream.len() as f64
                            }),
                        });
                    }
                }
            }
        }
    }

    StrataTable {
        threads: summaries,
        cells,
        n_eligible: eligible.len(),
        tercile_edges: (e1, e2),
    }
}
