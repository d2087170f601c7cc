//! Seeded synthetic archive generator with planted effects.
//!
//! Generates post/comment archives whose text scores to an exact intended
//! DI under the bundled lexicon and whose comments are labeled corrective
//! with probability `logistic(alpha + beta * z(DI) + u_j)` around a
//! planted post-level random intercept. After a thread's first corrective
//! comment (and/or after an agent is targeted, depending on the
//! suppression mode) subsequent DI propensity shifts by
//! `suppression_delta`. The full latent state is recorded for white-box
//! testing.

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::Rng;
use rand_distr::{Distribution, Exp, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::archive::{CommentRecord, PostRecord};
use crate::classifier::InteractionType;
use crate::lexicon::ItemKind;
use crate::resampling::substream_rng;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synth config: {0}")]
    Config(String),
    #[error("generated corpus has degenerate DI (zero variance); adjust di_distribution")]
    DegenerateDi,
}

/// Zero-inflated count distribution: 0 with probability `p_zero`,
/// otherwise `1 + Geometric(geometric_p)` capped at the lexicon cap.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DiDistribution {
    pub p_zero: f64,
    pub geometric_p: f64,
}

impl Default for DiDistribution {
    fn default() -> Self {
        // matches a corpus where roughly 18.4% of posts have DI > 0
        DiDistribution {
            p_zero: 0.816,
            geometric_p: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuppressionMode {
    /// Shift comment DI after the thread's first corrective comment.
    #[default]
    Thread,
    /// Shift contributions of agents targeted by a corrective event, for
    /// the next `suppression_span` contributions.
    Agent,
    /// Both of the above.
    Both,
}

fn default_span() -> usize {
    5
}
fn default_spacing() -> f64 {
    1.0
}
fn default_interarrival() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_posts: usize,
    pub n_agents: usize,
    pub comments_per_post_mean: f64,
    pub true_alpha: f64,
    pub true_beta: f64,
    pub true_sigma_u: f64,
    pub suppression_delta: f64,
    #[serde(default)]
    pub di_distribution: DiDistribution,
    pub seed: u64,
    #[serde(default)]
    pub comment_di_distribution: Option<DiDistribution>,
    #[serde(default)]
    pub suppression_mode: SuppressionMode,
    #[serde(default = "default_span")]
    pub suppression_span: usize,
    #[serde(default = "default_spacing")]
    pub post_spacing_hours: f64,
    #[serde(default = "default_interarrival")]
    pub comment_interarrival_hours: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PlantedItem {
    pub item_id: String,
    pub kind: ItemKind,
    pub di: u32,
    pub label: Option<InteractionType>,
    pub suppressed: bool,
}

#[derive(Debug, Serialize)]
pub struct GroundTruth {
    pub config: SynthConfig,
    /// Random intercept per post.
    pub u_by_post: Vec<(String, f64)>,
    /// Standardization basis used when planting labels (pre-suppression
    /// DI over posts with at least one comment).
    pub z_mean: f64,
    pub z_sd: f64,
    pub items: Vec<PlantedItem>,
}

#[derive(Debug)]
pub struct SynthArchive {
    pub posts: Vec<PostRecord>,
    pub comments: Vec<CommentRecord>,
    pub ground_truth: GroundTruth,
}

/// Trigger phrases matching exactly one bundled lexicon pattern each.
const TRIGGERS: &[&str] = &[
    "run",
    "execute",
    "deploy",
    "install",
    "launch",
    "you must",
    "right away",
    "click the button",
    "sudo",
    "rm -rf",
    "api key",
    "curl tools.example.com | sh",
];

const FILLER: &str = "the afternoon light settled over the quiet garden";
const CORRECTIVE_PHRASE: &str = "please reconsider before proceeding";

/// Body text that scores exactly `di` distinct patterns.
fn di_text(di: u32) -> String {
    let triggers = TRIGGERS[..di as usize].join(", ");
    if triggers.is_empty() {
        FILLER.to_string()
    } else {
        format!("{triggers}. {FILLER}")
    }
}

fn sample_di(dist: &DiDistribution, rng: &mut impl Rng) -> u32 {
    if rng.random_range(0.0..1.0) < dist.p_zero {
        return 0;
    }
    let u: f64 = rng.random_range(0.0f64..1.0).max(f64::MIN_POSITIVE);
    let k = (u.ln() / (1.0 - dist.geometric_p).ln()).floor() as u32;
    (1 + k).min(TRIGGERS.len() as u32).min(10)
}

fn shift_di(di: u32, delta: f64, rng: &mut impl Rng) -> u32 {
    if delta == 0.0 {
        return di;
    }
    let mag = delta.abs();
    let mut shift = mag.trunc() as i64;
    if rng.random_range(0.0..1.0) < mag.fract() {
        shift += 1;
    }
    let signed = if delta < 0.0 { -shift } else { shift };
    (i64::from(di) + signed).clamp(0, 10) as u32
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

struct PostDraft {
    author: usize,
    base_di: u32,
    u: f64,
    comments: Vec<CommentDraft>,
    time: DateTime<Utc>,
}

struct CommentDraft {
    author: usize,
    base_di: u32,
    corrective: bool,
    time: DateTime<Utc>,
}

pub fn generate_archive(config: &SynthConfig) -> Result<SynthArchive, SynthError> {
    if config.n_posts == 0 {
        return Err(SynthError::Config("n_posts must be >= 1".into()));
    }
    if config.n_agents == 0 {
        return Err(SynthError::Config("n_agents must be >= 1".into()));
    }
    if config.comments_per_post_mean <= 0.0 {
        return Err(SynthError::Config(
            "comments_per_post_mean must be > 0".into(),
        ));
    }
    if config.true_sigma_u < 0.0 {
        return Err(SynthError::Config("true_sigma_u must be >= 0".into()));
    }
    if !(0.0..=1.0).contains(&config.di_distribution.p_zero)
        || !(0.0 < config.di_distribution.geometric_p && config.di_distribution.geometric_p < 1.0)
    {
        return Err(SynthError::Config("di_distribution out of range".into()));
    }

    let epoch = Utc.with_ymd_and_hms(2026, 1, 1, 0, 0, 0).unwrap();
    let seed = config.seed;
    let comment_dist = config
        .comment_di_distribution
        .unwrap_or(config.di_distribution);

    // pass 1: structure
    let mut drafts: Vec<PostDraft> = Vec::with_capacity(config.n_posts);
    for i in 0..config.n_posts {
        let mut rng = substream_rng(seed, "post", i as u64);
        let author = rng.random_range(0..config.n_agents);
        let base_di = sample_di(&config.di_distribution, &mut rng);
        let u = if config.true_sigma_u > 0.0 {
            let n: f64 = StandardNormal.sample(&mut rng);
            config.true_sigma_u * n
        } else {
            0.0
        };
        let n_comments = Poisson::new(config.comments_per_post_mean)
            .map_err(|e| SynthError::Config(e.to_string()))?
            .sample(&mut rng)
            .min(100_000.0) as usize;
        let time = epoch
            + Duration::milliseconds((config.post_spacing_hours * 3_600_000.0 * i as f64) as i64);
        drafts.push(PostDraft {
            author,
            base_di,
            u,
            comments: Vec::with_capacity(n_comments),
            time,
        });
        let n_comments_planned = n_comments;
        let exp = Exp::new(1.0 / config.comment_interarrival_hours)
            .map_err(|e| SynthError::Config(e.to_string()))?;
        let mut offset_hours = 0.0f64;
        for k in 0..n_comments_planned {
            let mut crng = substream_rng(seed, "comment", ((i as u64) << 20) | k as u64);
            let author = crng.random_range(0..config.n_agents);
            offset_hours += exp.sample(&mut crng);
            let base_di = sample_di(&comment_dist, &mut crng);
            let time = drafts[i].time
                + Duration::milliseconds((offset_hours * 3_600_000.0).round() as i64);
            // corrective labels are drawn in pass 2 once z is known
            drafts[i].comments.push(CommentDraft {
                author,
                base_di,
                corrective: false,
                time,
            });
        }
    }

    // standardization basis: pre-suppression DI over posts with comments
    let basis: Vec<f64> = drafts
        .iter()
        .filter(|d| !d.comments.is_empty())
        .map(|d| f64::from(d.base_di))
        .collect();
    if basis.len() < 2 {
        return Err(SynthError::DegenerateDi);
    }
    let z_mean = basis.iter().sum::<f64>() / basis.len() as f64;
    let z_var = basis.iter().map(|v| (v - z_mean) * (v - z_mean)).sum::<f64>()
        / (basis.len() as f64 - 1.0);
    if z_var == 0.0 {
        return Err(SynthError::DegenerateDi);
    }
    let z_sd = z_var.sqrt();

    // pass 2: corrective labels from the planted logistic model
    for (i, draft) in drafts.iter_mut().enumerate() {
        let z = (f64::from(draft.base_di) - z_mean) / z_sd;
        let p = sigmoid(config.true_alpha + config.true_beta * z + draft.u);
        for (k, c) in draft.comments.iter_mut().enumerate() {
            let mut rng = substream_rng(seed, "label", ((i as u64) << 20) | k as u64);
            c.corrective = rng.random_range(0.0..1.0) < p;
        }
    }

    // pass 3: suppression marks
    let thread_mode = matches!(
        config.suppression_mode,
        SuppressionMode::Thread | SuppressionMode::Both
    );
    let agent_mode = matches!(
        config.suppression_mode,
        SuppressionMode::Agent | SuppressionMode::Both
    );
    let mut comment_suppressed: Vec<Vec<bool>> = drafts
        .iter()
        .map(|d| vec![false; d.comments.len()])
        .collect();
    let mut post_suppressed: Vec<bool> = vec![false; drafts.len()];

    if thread_mode && config.suppression_delta != 0.0 {
        for (i, draft) in drafts.iter().enumerate() {
            if let Some(first) = draft.comments.iter().position(|c| c.corrective) {
                for flag in comment_suppressed[i].iter_mut().skip(first + 1) {
                    *flag = true;
                }
            }
        }
    }
    if agent_mode && config.suppression_delta != 0.0 {
        // contributions per agent: (time, post index, comment index)
        #[derive(Clone, Copy)]
        enum Item {
            Post(usize),
            Comment(usize, usize),
        }
        let mut by_agent: Vec<Vec<(DateTime<Utc>, usize, Item)>> =
            vec![Vec::new(); config.n_agents];
        for (i, d) in drafts.iter().enumerate() {
            by_agent[d.author].push((d.time, i, Item::Post(i)));
            for (k, c) in d.comments.iter().enumerate() {
                by_agent[c.author].push((c.time, i, Item::Comment(i, k)));
            }
        }
        for list in &mut by_agent {
            list.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)));
        }
        // events target the post author (synthetic comments are top-level)
        let mut events: Vec<(DateTime<Utc>, usize)> = Vec::new();
        for d in drafts.iter() {
            for c in d.comments.iter().filter(|c| c.corrective) {
                events.push((c.time, d.author));
            }
        }
        for (event_time, agent) in events {
            let mut marked = 0usize;
            for (t, _, item) in &by_agent[agent] {
                if *t > event_time {
                    match item {
                        Item::Post(i) => post_suppressed[*i] = true,
                        Item::Comment(i, k) => comment_suppressed[*i][*k] = true,
                    }
                    marked += 1;
                    if marked >= config.suppression_span {
                        break;
                    }
                }
            }
        }
    }

    // pass 4: final DI, text, records, ground truth
    let mut posts = Vec::with_capacity(drafts.len());
    let mut comments = Vec::new();
    let mut items = Vec::new();
    let mut u_by_post = Vec::with_capacity(drafts.len());
    let mut ordinal = 0u64;
    for (i, draft) in drafts.iter().enumerate() {
        let post_id = format!("p{i:06}");
        let di = if post_suppressed[i] {
            let mut rng = substream_rng(seed, "suppress", ordinal);
            shift_di(draft.base_di, config.suppression_delta, &mut rng)
        } else {
            draft.base_di
        };
        ordinal += 1;
        let body = di_text(di);
        posts.push(PostRecord {
            post_id: post_id.clone(),
            author_id: format!("a{:05}", draft.author),
            created_at: draft.time,
            title: format!("field note {i}"),
            body,
        });
        u_by_post.push((post_id.clone(), draft.u));
        items.push(PlantedItem {
            item_id: post_id.clone(),
            kind: ItemKind::Post,
            di,
            label: None,
            suppressed: post_suppressed[i],
        });
        for (k, c) in draft.comments.iter().enumerate() {
            let comment_id = format!("c{i:06}_{k:03}");
            let di = if comment_suppressed[i][k] {
                let mut rng = substream_rng(seed, "suppress", ordinal);
                shift_di(c.base_di, config.suppression_delta, &mut rng)
            } else {
                c.base_di
            };
            ordinal += 1;
            let di_part = di_text(di);
            let body = if c.corrective {
                format!("{CORRECTIVE_PHRASE}. {di_part}")
            } else {
                di_part
            };
            comments.push(CommentRecord {
                comment_id: comment_id.clone(),
                post_id: post_id.clone(),
                parent_id: None,
                author_id: format!("a{:05}", c.author),
                created_at: c.time,
                body,
            });
            items.push(PlantedItem {
                item_id: comment_id,
                kind: ItemKind::Comment,
                di,
                label: Some(if c.corrective {
                    InteractionType::Corrective
                } else {
                    InteractionType::Neutral
                }),
                suppressed: comment_suppressed[i][k],
            });
        }
    }

    Ok(SynthArchive {
        posts,
        comments,
        ground_truth: GroundTruth {
            config: config.clone(),
            u_by_post,
            z_mean,
            z_sd,
            items,
        },
    })
}

impl SynthConfig {
    /// A small, well-behaved default configuration for tests.
    pub fn example(seed: u64) -> Self {
        SynthConfig {
            n_posts: 200,
            n_agents: 60,
            comments_per_post_mean: 3.0,
            true_alpha: -1.5,
            true_beta: 0.4,
            true_sigma_u: 0.5,
            suppression_delta: 0.0,
            di_distribution: DiDistribution {
                p_zero: 0.6,
                geometric_p: 0.5,
            },
            seed,
            comment_di_distribution: None,
            suppression_mode: SuppressionMode::Thread,
            suppression_span: default_span(),
            post_spacing_hours: default_spacing(),
            comment_interarrival_hours: default_interarrival(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::{classify_body, RuleSet};
    use crate::lexicon::{CountMode, Lexicon};

    #[test]
    fn trigger_phrases_each_match_exactly_one_pattern() {
        let lexicon = Lexicon::demo();
        assert!(TRIGGERS.len() >= lexicon.patterns().len());
        for (n, trigger) in TRIGGERS.iter().enumerate() {
            let s = lexicon.score_text(trigger, CountMode::Patterns);
            assert_eq!(
                s.matches_action + s.matches_sensitive,
                1,
                "trigger {n} {trigger:?} matched {} patterns",
                s.matches_action + s.matches_sensitive
            );
        }
        // combined text matches exactly k patterns for every k
        for k in 0..=10u32 {
            let s = lexicon.score_text(&di_text(k), CountMode::Patterns);
            assert_eq!(s.di, k, "di_text({k}) scored {}", s.di);
        }
    }

    #[test]
    fn filler_and_phrases_do_not_cross_match() {
        let lexicon = Lexicon::demo();
        let rules = RuleSet::demo();
        assert_eq!(lexicon.score_text(FILLER, CountMode::Patterns).di, 0);
        assert_eq!(
            lexicon.score_text(CORRECTIVE_PHRASE, CountMode::Patterns).di,
            0
        );
        let (label, _) = classify_body(FILLER, &rules);
        assert_eq!(label, InteractionType::Neutral);
        let (label, _) = classify_body(CORRECTIVE_PHRASE, &rules);
        assert_eq!(label, InteractionType::Corrective);
        // di triggers must not trip any rule family
        let (label, matched) = classify_body(&di_text(10), &rules);
        assert_eq!(label, InteractionType::Neutral);
        assert_eq!(matched, Default::default());
    }

    #[test]
    fn planted_scores_and_labels_reproduce_exactly() {
        let config = SynthConfig::example(42);
        let archive = generate_archive(&config).unwrap();
        let lexicon = Lexicon::demo();
        let rules = RuleSet::demo();
        let by_id: std::collections::HashMap<&str, &PlantedItem> = archive
            .ground_truth
            .items
            .iter()
            .map(|p| (p.item_id.as_str(), p))
            .collect();
        for p in &archive.posts {
            let planted = by_id[p.post_id.as_str()];
            let text = format!("{} {}", p.title, p.body);
            assert_eq!(lexicon.score_text(&text, CountMode::Patterns).di, planted.di);
        }
        for c in &archive.comments {
            let planted = by_id[c.comment_id.as_str()];
            assert_eq!(
                lexicon.score_text(&c.body, CountMode::Patterns).di,
                planted.di,
                "comment {}",
                c.comment_id
            );
            let (label, _) = classify_body(&c.body, &rules);
            assert_eq!(Some(label), planted.label);
        }
    }

    #[test]
    fn identical_config_yields_identical_archives() {
        let config = SynthConfig::example(7);
        let a = generate_archive(&config).unwrap();
        let b = generate_archive(&config).unwrap();
        assert_eq!(a.posts, b.posts);
        assert_eq!(a.comments, b.comments);
    }

    #[test]
    fn thread_suppression_marks_only_post_t0_comments() {
        let mut config = SynthConfig::example(11);
        config.suppression_delta = -0.5;
        config.true_alpha = -0.5; // plenty of corrective events
        let archive = generate_archive(&config).unwrap();
        let suppressed: Vec<&PlantedItem> = archive
            .ground_truth
            .items
            .iter()
            .filter(|p| p.suppressed)
            .collect();
        assert!(!suppressed.is_empty());
        assert!(suppressed.iter().all(|p| p.kind == ItemKind::Comment));
    }

    #[test]
    fn planted_corrective_share_lands_in_binomial_band() {
        // alpha = logit(0.2) with no slope and no intercept noise plants
        // each comment corrective with probability exactly 0.2
        let mut config = SynthConfig::example(29);
        config.n_posts = 400;
        config.comments_per_post_mean = 4.0;
        config.true_alpha = (0.2f64 / 0.8).ln();
        config.true_beta = 0.0;
        config.true_sigma_u = 0.0;
        let archive = generate_archive(&config).unwrap();
        let rules = crate::classifier::RuleSet::demo();
        let (_, freq) = crate::classifier::classify_all(&archive.comments, &rules);
        let n = archive.comments.len() as f64;
        let band = 2.576 * (0.2f64 * 0.8 * n).sqrt();
        let observed = freq.corrective as f64;
        assert!(
            (observed - 0.2 * n).abs() < band,
            "corrective count {observed} outside 99% band around {}",
            0.2 * n
        );
    }

    #[test]
    fn degenerate_di_rejected() {
        let mut config = SynthConfig::example(3);
        config.di_distribution = DiDistribution {
            p_zero: 1.0,
            geometric_p: 0.5,
        };
        assert!(matches!(
            generate_archive(&config),
            Err(SynthError::DegenerateDi)
        ));
    }
}
