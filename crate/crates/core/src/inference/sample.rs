//! Regression sample assembly and DI standardization.

use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

use crate::archive::CommentRecord;
use crate::classifier::{ClassifiedComment, InteractionType};
use crate::lexicon::{DirectiveScore, ItemKind};

use super::FitError;

/// One comment row of the coupling sample: corrective outcome plus the
/// post's raw and standardized directive intensity.
#[derive(Debug, Clone, Serialize)]
pub struct SampleRow {
    pub comment_id: String,
    pub post_id: String,
    pub y: bool,
    pub di_raw: u32,
    pub z_di: f64,
}

/// Basis over which the standardization mean and SD are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ZBasis {
    /// Unique posts appearing in the sample (one value per post).
    #[default]
    Posts,
    /// Comment rows (posts weighted by their comment count).
    Comments,
}

#[derive(Debug, Clone, Serialize)]
pub struct RegressionSample {
    pub rows: Vec<SampleRow>,
    pub di_mean: f64,
    pub di_sd: f64,
    pub basis: ZBasis,
    /// Number of distinct posts among the rows.
    pub n_posts: usize,
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n-1 convention).
pub(crate) fn sample_sd(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    (ss / (xs.len() as f64 - 1.0)).sqrt()
}

#[derive(Debug, Clone)]
pub struct Standardization {
    pub mean: f64,
    pub sd: f64,
    pub z_by_post: HashMap<String, f64>,
}

/// Standardize post-level DI over the unique posts named in
/// `sample_posts`. Errors when fewer than two posts are present or the
/// DI values have zero variance.
pub fn standardize_di(
    post_scores: &[DirectiveScore],
    sample_posts: &[String],
) -> Result<Standardization, FitError> {
    let di_by_post: HashMap<&str, u32> = post_scores
        .iter()
        .filter(|s| s.kind == ItemKind::Post)
        .map(|s| (s.item_id.as_str(), s.di))
        .collect();
    let mut basis: BTreeMap<&str, f64> = BTreeMap::new();
    for p in sample_posts {
        let di = di_by_post.get(p.as_str()).ok_or_else(|| {
            FitError::DegenerateInput(format!("post {p:?} has no directive score"))
        })?;
        basis.insert(p.as_str(), f64::from(*di));
    }
    if basis.len() < 2 {
        return Err(FitError::DegenerateInput(
            "standardization needs at least two posts".into(),
        ));
    }
    let values: Vec<f64> = basis.values().copied().collect();
    let (m, sd) = (mean(&values), sample_sd(&values));
    if sd == 0.0 {
        return Err(FitError::DegenerateInput(
            "post-level DI has zero variance".into(),
        ));
    }
    Ok(Standardization {
        mean: m,
        sd,
        z_by_post: basis
            .into_iter()
            .map(|(p, di)| (p.to_string(), (di - m) / sd))
            .collect(),
    })
}

/// Join labels, comments, and post scores into the coupling sample.
/// `y` is 1 exactly when the label is Corrective. Comments whose post has
/// no score (quarantined posts) are skipped.
pub fn build_sample(
    post_scores: &[DirectiveScore],
    labels: &[ClassifiedComment],
    comments: &[CommentRecord],
    basis: ZBasis,
) -> Result<RegressionSample, FitError> {
    let di_by_post: HashMap<&str, u32> = post_scores
        .iter()
        .filter(|s| s.kind == ItemKind::Post)
        .map(|s| (s.item_id.as_str(), s.di))
        .collect();
    let label_by_comment: HashMap<&str, InteractionType> = labels
        .iter()
        .map(|l| (l.comment_id.as_str(), l.label))
        .collect();

    let mut rows: Vec<(String, String, bool, u32)> = Vec::new();
    for c in comments {
        let Some(di) = di_by_post.get(c.post_id.as_str()) else {
            continue;
        };
        let Some(label) = label_by_comment.get(c.comment_id.as_str()) else {
            continue;
        };
        rows.push((
            c.comment_id.clone(),
            c.post_id.clone(),
            *label == InteractionType::Corrective,
            *di,
        ));
    }
    if rows.is_empty() {
        return Err(FitError::DegenerateInput(
            "no labeled comments with scored posts".into(),
        ));
    }
    rows.sort_by(|a, b| a.1.cmp(&b.1).then_with(|| a.0.cmp(&b.0)));

    let basis_values: Vec<f64> = match basis {
        ZBasis::Posts => {
            let unique: BTreeMap<&str, u32> =
                rows.iter().map(|(_, p, _, di)| (p.as_str(), *di)).collect();
            unique.values().map(|di| f64::from(*di)).collect()
        }
        ZBasis::Comments => rows.iter().map(|(_, _, _, di)| f64::from(*di)).collect(),
    };
    if basis_values.len() < 2 {
        return Err(FitError::DegenerateInput(
            "standardization needs at least two basis values".into(),
        ));
    }
    let (m, sd) = (mean(&basis_values), sample_sd(&basis_values));
    if sd == 0.0 {
        return Err(FitError::DegenerateInput(
            "DI has zero variance over the standardization basis".into(),
        ));
    }

    let n_posts = rows
        .iter()
        .map(|(_, p, _, _)| p.as_str())
        .collect::<std::collections::BTreeSet<_>>()
        .len();
    Ok(RegressionSample {
        rows: rows
            .into_iter()
            .map(|(comment_id, post_id, y, di_raw)| SampleRow {
                comment_id,
                post_id,
                y,
                di_raw,
                z_di: (f64::from(di_raw) - m) / sd,
            })
            .collect(),
        di_mean: m,
        di_sd: sd,
        basis,
        n_posts,
    })
}

impl RegressionSample {
    pub fn z_values(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.z_di).collect()
    }

    pub fn y_values(&self) -> Vec<bool> {
        self.rows.iter().map(|r| r.y).collect()
    }

    /// Row indices grouped by post, in post-id order.
    pub fn clusters(&self) -> Vec<Vec<usize>> {
        let mut by_post: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, r) in self.rows.iter().enumerate() {
            by_post.entry(r.post_id.as_str()).or_default().push(i);
        }
        by_post.into_values().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::MatchedFamilies;
    use chrono::Utc;

    fn score(post: &str, di: u32) -> DirectiveScore {
        DirectiveScore {
            item_id: post.into(),
            kind: ItemKind::Post,
            matches_action: di,
            matches_sensitive: 0,
            di,
        }
    }

    fn label(comment: &str, label: InteractionType) -> ClassifiedComment {
        ClassifiedComment {
            comment_id: comment.into(),
            label,
            matched_families: MatchedFamilies::default(),
        }
    }

    fn comment(id: &str, post: &str) -> CommentRecord {
        CommentRecord {
            comment_id: id.into(),
            post_id: post.into(),
            parent_id: None,
            author_id: "a".into(),
            created_at: Utc::now(),
            body: String::new(),
        }
    }

    #[test]
    fn two_point_standardization_uses_n_minus_one() {
        let std = standardize_di(
            &[score("p1", 0), score("p2", 2)],
            &["p1".to_string(), "p2".to_string()],
        )
        .unwrap();
        let z1 = std.z_by_post["p1"];
        let z2 = std.z_by_post["p2"];
        assert!((z1 + std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12, "z1 = {z1}");
        assert!((z2 - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn zero_variance_is_an_error() {
        let err = standardize_di(
            &[score("p1", 0), score("p2", 0)],
            &["p1".to_string(), "p2".to_string()],
        )
        .unwrap_err();
        assert!(matches!(err, FitError::DegenerateInput(_)));
    }

    #[test]
    fn sample_z_has_zero_mean_unit_sd_over_basis() {
        let scores: Vec<DirectiveScore> =
            (0..20).map(|i| score(&format!("p{i:02}"), i % 5)).collect();
        let comments: Vec<CommentRecord> = (0..20)
            .flat_map(|i| {
                (0..=(i % 3)).map(move |k| comment(&format!("c{i:02}_{k}"), &format!("p{i:02}")))
            })
            .collect();
        let labels: Vec<ClassifiedComment> = comments
            .iter()
            .enumerate()
            .map(|(i, c)| {
                label(
                    &c.comment_id,
                    if i % 4 == 0 {
                        InteractionType::Corrective
                    } else {
                        InteractionType::Neutral
                    },
                )
            })
            .collect();
        let sample = build_sample(&scores, &labels, &comments, ZBasis::Posts).unwrap();
        // recompute over unique posts
        let unique: BTreeMap<&str, f64> = sample
            .rows
            .iter()
            .map(|r| (r.post_id.as_str(), r.z_di))
            .collect();
        let zs: Vec<f64> = unique.values().copied().collect();
        assert!(mean(&zs).abs() < 1e-12);
        assert!((sample_sd(&zs) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn scaling_di_leaves_z_unchanged() {
        let base: Vec<f64> = vec![0.0, 1.0, 1.0, 3.0, 7.0];
        let scaled: Vec<f64> = base.iter().map(|x| x * 13.0).collect();
        let z = |xs: &[f64]| -> Vec<f64> {
            let (m, sd) = (mean(xs), sample_sd(xs));
            xs.iter().map(|x| (x - m) / sd).collect()
        };
        for (a, b) in z(&base).iter().zip(z(&scaled)) {
            assert!((a - b).abs() < 1e-10);
        }
    }
}
