//! Event-aligned within-thread analysis around the first corrective
//! response.
//!
//! Each thread with a corrective comment is aligned at `t0`, the earliest
//! corrective timestamp. Comment-level DI is compared across a symmetric
//! window: the before side is `[t0 - w, t0)`, the after side `(t0, t0 + w]`,
//! so comments exactly at `t0` (including the corrective itself and any
//! tied comments) belong to neither side. A thread is regulatable when
//! both sides are non-empty and some before-comment has DI > 0.

use std::collections::HashMap;

use chrono::{DateTime, Duration, Utc};
use serde::Serialize;

use crate::archive::Thread;
use crate::classifier::InteractionType;
use crate::lexicon::DirectiveScore;

#[derive(Debug, Clone, Serialize)]
pub struct EventWindow {
    pub post_id: String,
    pub t0: DateTime<Utc>,
    pub before: Vec<(String, u32)>,
    pub after: Vec<(String, u32)>,
    pub window_hours: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RegulatableThread {
    pub window: EventWindow,
    /// mean after-DI minus mean before-DI
    pub delta_mean: f64,
    pub fixed_n_delta: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExclusionReason {
    NoBeforeComments,
    NoAfterComments,
    NoDirectiveBefore,
}

#[derive(Debug, Default, Serialize)]
pub struct EventAlignment {
    pub regulatable: Vec<RegulatableThread>,
    pub excluded: Vec<(String, ExclusionReason)>,
    /// Threads containing at least one corrective comment.
    pub n_candidate_threads: usize,
}

fn window_duration(hours: f64) -> Duration {
    Duration::milliseconds((hours * 3_600_000.0).round() as i64)
}

/// Align every thread at its first corrective response and compute the
/// per-thread before/after DI delta. Threads failing the regulatable
/// conditions land in the exclusion census with a reason.
pub fn event_aligned_deltas(
    threads: &[Thread],
    labels: &HashMap<&str, InteractionType>,
    comment_scores: &[DirectiveScore],
    window_hours: f64,
) -> EventAlignment {
    let di_by_comment: HashMap<&str, u32> = comment_scores
        .iter()
        .map(|s| (s.item_id.as_str(), s.di))
        .collect();
    let w = window_duration(window_hours);
    let mut out = EventAlignment::default();

    for thread in threads {
        let t0 = thread
            .comments
            .iter()
            .filter(|c| {
                labels.get(c.comment_id.as_str()) == Some(&InteractionType::Corrective)
            })
            .map(|c| c.created_at)
            .min();
        let Some(t0) = t0 else { continue };
        out.n_candidate_threads += 1;

        let mut before = Vec::new();
        let mut after = Vec::new();
        for c in &thread.comments {
            let di = di_by_comment.get(c.comment_id.as_str()).copied().unwrap_or(0);
            let t = c.created_at;
            if t >= t0 - w && t < t0 {
                before.push((c.comment_id.clone(), di));
            } else if t > t0 && t <= t0 + w {
                after.push((c.comment_id.clone(), di));
            }
        }

        let reason = if before.is_empty() {
            Some(ExclusionReason::NoBeforeComments)
        } else if after.is_empty() {
            Some(ExclusionReason::NoAfterComments)
        } else if before.iter().all(|(_, di)| *di == 0) {
            Some(ExclusionReason::NoDirectiveBefore)
        } else {
            None
        };
        match reason {
            Some(r) => out.excluded.push((thread.post.post_id.clone(), r)),
            None => {
                let mean = |side: &[(String, u32)]| {
                    side.iter().map(|(_, di)| f64::from(*di)).sum::<f64>() / side.len() as f64
                };
                let delta_mean = mean(&after) - mean(&before);
                out.regulatable.push(RegulatableThread {
                    window: EventWindow {
                        post_id: thread.post.post_id.clone(),
                        t0,
                        before,
                        after,
                        window_hours,
                    },
                    delta_mean,
                    fixed_n_delta: None,
                });
            }
        }
    }
    out
}

/// Fixed-N robustness comparison: mean DI over the first `n` after-comments
/// minus mean DI over the last `n` before-comments, truncated to what is
/// available. Fills `fixed_n_delta` on each thread and returns the median
/// delta (None when no threads).
pub fn fixed_n_comparison(threads: &mut [RegulatableThread], n: usize) -> Option<f64> {
    if n == 0 {
        return None;
    }
    let mut deltas = Vec::with_capacity(threads.len());
    for t in threads.iter_mut() {
        let before = &t.window.before;
        let after = &t.window.after;
        let tail = &before[before.len().saturating_sub(n)..];
        let head = &after[..n.min(after.len())];
        let mean = |side: &[(String, u32)]| {
            side.iter().map(|(_, di)| f64::from(*di)).sum::<f64>() / side.len() as f64
        };
        let delta = mean(head) - mean(tail);
        t.fixed_n_delta = Some(delta);
        deltas.push(delta);
    }
    if deltas.is_empty() {
        None
    } else {
        Some(crate::resampling::bootstrap::median_of(&mut deltas))
    }
}
