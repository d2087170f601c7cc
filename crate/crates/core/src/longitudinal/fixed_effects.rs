//! Within-agent fixed-effects design around corrective events.
//!
//! A corrective comment targets the author of its parent comment when
//! `parent_id` is set, otherwise the author of the post. Each event marks
//! the targeted agent's next M contributions (posts and comments) as
//! treated; overlapping event windows union. The panel holds every
//! contribution of agents with at least one event, and the effect is
//! estimated by within-agent demeaning and OLS on the single treated
//! regressor with standard errors clustered by agent.

use std::collections::{BTreeMap, HashMap};

use chrono::{DateTime, Utc};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::archive::{CommentRecord, PostRecord, Thread};
use crate::classifier::InteractionType;
use crate::inference::sandwich::cluster_robust_cov;
use crate::inference::FitError;
use crate::lexicon::DirectiveScore;

#[derive(Debug, Clone, Serialize)]
pub struct FeEvent {
    pub event_time: DateTime<Utc>,
    pub target_agent: String,
    pub source_comment_id: String,
    /// The corrective author targeted their own contribution.
    pub self_correction: bool,
    /// `parent_id` was set but unresolvable; fell back to the post author.
    pub fallback_to_post: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct FePanelRow {
    pub agent_id: String,
    pub item_id: String,
    pub time: DateTime<Utc>,
    pub y: f64,
    pub treated: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FeOutcome {
    /// Raw directive intensity of the contribution.
    Di,
    /// Indicator of DI > 0.
    DiPositive,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct FeFit {
    pub beta: f64,
    /// Cluster-robust SE by agent; None with fewer than two agents.
    pub se: Option<f64>,
    pub n_rows: usize,
    pub n_agents: usize,
    pub n_treated: usize,
}

/// Resolve corrective comments to targeted agents per the parent-or-post
/// rule. Self-corrections are retained and flagged.
pub fn resolve_fe_events(
    threads: &[Thread],
    labels: &HashMap<&str, InteractionType>,
) -> Vec<FeEvent> {
    let mut events = Vec::new();
    for thread in threads {
        let author_by_comment: HashMap<&str, &str> = thread
            .comments
            .iter()
            .map(|c| (c.comment_id.as_str(), c.author_id.as_str()))
            .collect();
        for c in &thread.comments {
            if labels.get(c.comment_id.as_str()) != Some(&InteractionType::Corrective) {
                continue;
            }
            let (target_agent, fallback_to_post) = match c.parent_id.as_deref() {
                Some(parent) => match author_by_comment.get(parent) {
                    Some(author) => ((*author).to_string(), false),
                    None => (thread.post.author_id.clone(), true),
                },
                None => (thread.post.author_id.clone(), false),
            };
            events.push(FeEvent {
                event_time: c.created_at,
                self_correction: target_agent == c.author_id,
                target_agent,
                source_comment_id: c.comment_id.clone(),
                fallback_to_post,
            });
        }
    }
    events
}

/// Build the panel: for each event, the `m` earliest contributions by the
/// targeted agent strictly after the event time are treated; all other
/// contributions of event-having agents are controls. Agents without
/// events are excluded entirely.
pub fn build_fe_panel(
    events: &[FeEvent],
    posts: &[PostRecord],
    comments: &[CommentRecord],
    comment_and_post_scores: &[DirectiveScore],
    m: usize,
    outcome: FeOutcome,
    include_self_corrections: bool,
) -> Vec<FePanelRow> {
    let di_by_item: HashMap<&str, u32> = comment_and_post_scores
        .iter()
        .map(|s| (s.item_id.as_str(), s.di))
        .collect();

    let mut by_agent: BTreeMap<&str, Vec<(DateTime<Utc>, &str)>> = BTreeMap::new();
    for p in posts {
        by_agent
            .entry(p.author_id.as_str())
            .or_default()
            .push((p.created_at, p.post_id.as_str()));
    }
    for c in comments {
        by_agent
            .entry(c.author_id.as_str())
            .or_default()
            .push((c.created_at, c.comment_id.as_str()));
    }
    for contributions in by_agent.values_mut() {
        contributions.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.cmp(b.1)));
    }

    let mut events_by_agent: BTreeMap<&str, Vec<&FeEvent>> = BTreeMap::new();
    for e in events {
        if e.self_correction && !include_self_corrections {
            continue;
        }
        events_by_agent
            .entry(e.target_agent.as_str())
            .or_default()
            .push(e);
    }

    let mut panel = Vec::new();
    for (agent, agent_events) in &events_by_agent {
        let Some(contributions) = by_agent.get(agent) else {
            continue;
        };
        let mut treated = vec![false; contributions.len()];
        for e in agent_events {
            contributions
                .iter()
                .enumerate()
                .filter(|(_, (t, _))| *t > e.event_time)
                .take(m)
                .for_each(|(i, _)| treated[i] = true);
        }
        for ((time, item_id), is_treated) in contributions.iter().zip(&treated) {
            let di = di_by_item.get(item_id).copied().unwrap_or(0);
            let y = match outcome {
                FeOutcome::Di => f64::from(di),
                FeOutcome::DiPositive => f64::from(u8::from(di > 0)),
            };
            panel.push(FePanelRow {
                agent_id: (*agent).to_string(),
                item_id: (*item_id).to_string(),
                time: *time,
                y,
                treated: *is_treated,
            });
        }
    }
    panel
}

/// Within-agent ("demeaned") OLS of the outcome on the treated indicator.
/// Agents with no variation in treated contribute nothing to the slope.
pub fn fit_within_fe(panel: &[FePanelRow]) -> Result<FeFit, FitError> {
    if panel.is_empty() {
        return Err(FitError::DegenerateInput("empty panel".into()));
    }
    let mut by_agent: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, row) in panel.iter().enumerate() {
        by_agent.entry(row.agent_id.as_str()).or_default().push(i);
    }

    let mut x_tilde = vec![0.0f64; panel.len()];
    let mut y_tilde = vec![0.0f64; panel.len()];
    for rows in by_agent.values() {
        let nf = rows.len() as f64;
        let mean_x: f64 = rows
            .iter()
            .map(|&i| f64::from(u8::from(panel[i].treated)))
            .sum::<f64>()
            / nf;
        let mean_y: f64 = rows.iter().map(|&i| panel[i].y).sum::<f64>() / nf;
        for &i in rows {
            x_tilde[i] = f64::from(u8::from(panel[i].treated)) - mean_x;
            y_tilde[i] = panel[i].y - mean_y;
        }
    }

    let sxx: f64 = x_tilde.iter().map(|x| x * x).sum();
    if sxx == 0.0 {
        return Err(FitError::DegenerateInput(
            "no agent has within-agent variation in treated".into(),
        ));
    }
    let sxy: f64 = x_tilde.iter().zip(&y_tilde).map(|(x, y)| x * y).sum();
    let beta = sxy / sxx;

    let agent_index: BTreeMap<&str, usize> = by_agent
        .keys()
        .enumerate()
        .map(|(idx, agent)| (*agent, idx))
        .collect();
    let scores: Vec<(usize, DVector<f64>)> = panel
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let e = y_tilde[i] - beta * x_tilde[i];
            (
                agent_index[row.agent_id.as_str()],
                DVector::from_column_slice(&[x_tilde[i] * e]),
            )
        })
        .collect();
    let bread_inv = DMatrix::from_element(1, 1, 1.0 / sxx);
    let se = cluster_robust_cov(&bread_inv, &scores, panel.len())
        .ok()
        .map(|cov| cov[(0, 0)].sqrt());

    Ok(FeFit {
        beta,
        se,
        n_rows: panel.len(),
        n_agents: by_agent.len(),
        n_treated: panel.iter().filter(|r| r.treated).count(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{Duration, TimeZone};

    fn ts(minutes: i64) -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2026, 4, 1, 0, 0, 0).unwrap() + Duration::minutes(minutes)
    }

    fn post(id: &str, author: &str, minutes: i64) -> PostRecord {
        PostRecord {
            post_id: id.into(),
            author_id: author.into(),
            created_at: ts(minutes),
            title: String::new(),
            body: String::new(),
        }
    }

    fn comment(id: &str, post_id: &str, parent: Option<&str>, author: &str, minutes: i64) -> CommentRecord {
        CommentRecord {
            comment_id: id.into(),
            post_id: post_id.into(),
            parent_id: parent.map(String::from),
            author_id: author.into(),
            created_at: ts(minutes),
            body: String::new(),
        }
    }

    fn row(agent: &str, item: &str, treated: bool, y: f64) -> FePanelRow {
        FePanelRow {
            agent_id: agent.into(),
            item_id: item.into(),
            time: ts(0),
            y,
            treated,
        }
    }

    #[test]
    fn reply_event_targets_parent_author() {
        let p = post("p1", "alice", 0);
        let threads = vec![Thread {
            post: p,
            comments: vec![
                comment("c1", "p1", None, "bob", 10),
                comment("c2", "p1", Some("c1"), "carol", 20),
            ],
        }];
        let labels: HashMap<&str, InteractionType> =
            [("c2", InteractionType::Corrective)].into_iter().collect();
        let events = resolve_fe_events(&threads, &labels);
        assert_eq!(events.len(), 1);
        assert_eq!(events[0].target_agent, "bob");
        assert!(!events[0].self_correction);
    }

    #[test]
    fn top_level_event_targets_post_author() {
        let threads = vec![Thread {
            post: post("p1", "alice", 0),
            comments: vec![comment("c1", "p1", None, "bob", 10)],
        }];
        let labels: HashMap<&str, InteractionType> =
            [("c1", InteractionType::Corrective)].into_iter().collect();
        let events = resolve_fe_events(&threads, &labels);
        assert_eq!(events[0].target_agent, "alice");
    }

    #[test]
    fn self_correction_flagged() {
        let threads = vec![Thread {
            post: post("p1", "alice", 0),
            comments: vec![
                comment("c1", "p1", None, "bob", 10),
                comment("c2", "p1", Some("c1"), "bob", 20),
            ],
        }];
        let labels: HashMap<&str, InteractionType> =
            [("c2", InteractionType::Corrective)].into_iter().collect();
        let events = resolve_fe_events(&threads, &labels);
        assert!(events[0].self_correction);
        assert_eq!(events[0].target_agent, "bob");
    }

    #[test]
    fn panel_truncates_to_available_contributions() {
        let events = vec![FeEvent {
            event_time: ts(0),
            target_agent: "bob".into(),
            source_comment_id: "e".into(),
            self_correction: false,
            fallback_to_post: false,
        }];
        let posts = vec![post("p1", "bob", 10), post("p2", "bob", 20)];
        let comments = vec![comment("c1", "p1", None, "bob", 30)];
        let panel = build_fe_panel(&events, &posts, &comments, &[], 5, FeOutcome::Di, true);
        assert_eq!(panel.len(), 3);
        assert_eq!(panel.iter().filter(|r| r.treated).count(), 3);
    }

    #[test]
    fn overlapping_events_union_without_double_count() {
        let mk_event = |minutes: i64| FeEvent {
            event_time: ts(minutes),
            target_agent: "bob".into(),
            source_comment_id: format!("e{minutes}"),
            self_correction: false,
            fallback_to_post: false,
        };
        let events = vec![mk_event(0), mk_event(1)];
        let posts: Vec<PostRecord> = (0..4).map(|i| post(&format!("p{i}"), "bob", 10 + i)).collect();
        let panel = build_fe_panel(&events, &posts, &[], &[], 2, FeOutcome::Di, true);
        // both events mark overlapping windows: contributions 1-2 (first
        // event) and 1-2 again (second event, both after t=1)
        assert_eq!(panel.len(), 4);
        assert_eq!(panel.iter().filter(|r| r.treated).count(), 2);
    }

    #[test]
    fn treated_count_monotone_in_m() {
        let events = vec![FeEvent {
            event_time: ts(0),
            target_agent: "bob".into(),
            source_comment_id: "e".into(),
            self_correction: false,
            fallback_to_post: false,
        }];
        let posts: Vec<PostRecord> = (0..10).map(|i| post(&format!("p{i}"), "bob", 10 + i)).collect();
        let mut last = 0;
        for m in [1, 2, 5, 8, 20] {
            let panel = build_fe_panel(&events, &posts, &[], &[], m, FeOutcome::Di, true);
            let treated = panel.iter().filter(|r| r.treated).count();
            assert!(treated >= last);
            last = treated;
        }
    }

    #[test]
    fn single_agent_difference_of_means() {
        let panel = vec![
            row("a", "i1", true, 1.0),
            row("a", "i2", true, 1.0),
            row("a", "i3", false, 3.0),
            row("a", "i4", false, 3.0),
        ];
        let fit = fit_within_fe(&panel).unwrap();
        assert!((fit.beta + 2.0).abs() < 1e-12);
        assert!(fit.se.is_none(), "one cluster cannot have a clustered SE");
    }

    #[test]
    fn no_variation_is_an_error() {
        let panel = vec![row("a", "i1", true, 1.0), row("b", "i2", false, 2.0)];
        assert!(fit_within_fe(&panel).is_err());
    }
}
