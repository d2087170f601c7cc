//! Rule-based reply classification.
//!
//! Each comment body is tested against three pattern families and labeled
//! with exactly one interaction type under the fixed precedence
//! `Adverse > Corrective > Affirmation > Neutral`. Neutral has no patterns;
//! it is the fall-through when nothing matches. Matched families are kept
//! alongside the label for audit.

use std::collections::HashMap;
use std::io::Read;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::archive::CommentRecord;
use crate::lexicon::{compile_case_insensitive, nfc};

/// Demonstration rule families bundled for tests and synthetic archives.
pub const DEMO_RULES_CSV: &str = include_str!("../data/reply_rules.csv");

#[derive(Debug, Error)]
pub enum RuleSetError {
    #[error("rules schema mismatch: {0}")]
    Schema(String),
    #[error("rule {index} ({family:?}) does not compile: {message}")]
    BadPattern {
        index: usize,
        family: String,
        message: String,
    },
    #[error("rule {index} has unknown family {family:?}")]
    UnknownFamily { index: usize, family: String },
    #[error("rule set is empty")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum InteractionType {
    Adverse,
    Corrective,
    Affirmation,
    Neutral,
}

impl InteractionType {
    pub fn as_str(&self) -> &'static str {
        match self {
            InteractionType::Adverse => "adverse",
            InteractionType::Corrective => "corrective",
            InteractionType::Affirmation => "affirmation",
            InteractionType::Neutral => "neutral",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "adverse" => Some(InteractionType::Adverse),
            "corrective" => Some(InteractionType::Corrective),
            "affirmation" => Some(InteractionType::Affirmation),
            "neutral" => Some(InteractionType::Neutral),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RuleSet {
    adverse: Vec<regex::Regex>,
    corrective: Vec<regex::Regex>,
    affirmation: Vec<regex::Regex>,
}

/// Which families matched, independent of the winning label.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct MatchedFamilies {
    pub adverse: bool,
    pub corrective: bool,
    pub affirmation: bool,
}

impl MatchedFamilies {
    /// Pipe-joined family names, e.g. `"adverse|corrective"`.
    pub fn render(&self) -> String {
        let mut parts = Vec::new();
        if self.adverse {
            parts.push("adverse");
        }
        if self.corrective {
            parts.push("corrective");
        }
        if self.affirmation {
            parts.push("affirmation");
        }
        parts.join("|")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClassifiedComment {
    pub comment_id: String,
    pub label: InteractionType,
    pub matched_families: MatchedFamilies,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct LabelFrequencies {
    pub adverse: usize,
    pub corrective: usize,
    pub affirmation: usize,
    pub neutral: usize,
}

impl LabelFrequencies {
    pub fn total(&self) -> usize {
        self.adverse + self.corrective + self.affirmation + self.neutral
    }
}

#[derive(Debug, Deserialize)]
struct RawRule {
    family: String,
    regex: String,
}

impl RuleSet {
    /// Load rule families from CSV with header `family,regex`.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self, RuleSetError> {
        let mut rdr = csv::Reader::from_reader(reader);
        let mut rules = RuleSet {
            adverse: Vec::new(),
            corrective: Vec::new(),
            affirmation: Vec::new(),
        };
        let mut n = 0usize;
        for (index, rec) in rdr.deserialize::<RawRule>().enumerate() {
            let raw = rec.map_err(|e| RuleSetError::Schema(e.to_string()))?;
            let compiled =
                compile_case_insensitive(&raw.regex).map_err(|e| RuleSetError::BadPattern {
                    index: index + 1,
                    family: raw.family.clone(),
                    message: e.to_string(),
                })?;
            match raw.family.as_str() {
                "adverse" => rules.adverse.push(compiled),
                "corrective" => rules.corrective.push(compiled),
                "affirmation" => rules.affirmation.push(compiled),
                other => {
                    return Err(RuleSetError::UnknownFamily {
                        index: index + 1,
                        family: other.to_string(),
                    })
                }
            }
            n += 1;
        }
        if n == 0 {
            return Err(RuleSetError::Empty);
        }
        Ok(rules)
    }

    pub fn demo() -> Self {
        Self::from_csv_reader(DEMO_RULES_CSV.as_bytes()).expect("bundled rules are valid")
    }

    pub fn matched_families(&self, body: &str) -> MatchedFamilies {
        let body = nfc(body);
        MatchedFamilies {
            adverse: self.adverse.iter().any(|r| r.is_match(&body)),
            corrective: self.corrective.iter().any(|r| r.is_match(&body)),
            affirmation: self.affirmation.iter().any(|r| r.is_match(&body)),
        }
    }
}

/// Label one comment body. Precedence: Adverse > Corrective > Affirmation,
/// with Neutral as fall-through.
pub fn classify_body(body: &str, rules: &RuleSet) -> (InteractionType, MatchedFamilies) {
    let matched = rules.matched_families(body);
    let label = if matched.adverse {
        InteractionType::Adverse
    } else if matched.corrective {
        InteractionType::Corrective
    } else if matched.affirmation {
        InteractionType::Affirmation
    } else {
        InteractionType::Neutral
    };
    (label, matched)
}

pub fn classify_comment(comment: &CommentRecord, rules: &RuleSet) -> ClassifiedComment {
    let (label, matched_families) = classify_body(&comment.body, rules);
    ClassifiedComment {
        comment_id: comment.comment_id.clone(),
        label,
        matched_families,
    }
}

/// Label every comment and tally the label frequency table.
pub fn classify_all(
    comments: &[CommentRecord],
    rules: &RuleSet,
) -> (Vec<ClassifiedComment>, LabelFrequencies) {
    let labeled: Vec<ClassifiedComment> =
        comments.iter().map(|c| classify_comment(c, rules)).collect();
    let mut freq = LabelFrequencies::default();
    for c in &labeled {
        match c.label {
            InteractionType::Adverse => freq.adverse += 1,
            InteractionType::Corrective => freq.corrective += 1,
            InteractionType::Affirmation => freq.affirmation += 1,
            InteractionType::Neutral => freq.neutral += 1,
        }
    }
    (labeled, freq)
}

/// Convenience view used by the longitudinal analyses.
pub fn labels_by_id(labeled: &[ClassifiedComment]) -> HashMap<&str, InteractionType> {
    labeled
        .iter()
        .map(|c| (c.comment_id.as_str(), c.label))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::Utc;
    use proptest::prelude::*;

    fn comment(id: &str, body: &str) -> CommentRecord {
        CommentRecord {
            comment_id: id.into(),
            post_id: "p".into(),
            parent_id: None,
            author_id: "a".into(),
            created_at: Utc::now(),
            body: body.into(),
        }
    }

    #[test]
    fn adverse_outranks_corrective() {
        let rules = RuleSet::demo();
        let (label, matched) =
            classify_body("what a terrible idea, please reconsider", &rules);
        assert!(matched.adverse && matched.corrective);
        assert_eq!(label, InteractionType::Adverse);
    }

    #[test]
    fn corrective_outranks_affirmation() {
        let rules = RuleSet::demo();
        let (label, matched) = classify_body("great idea but be careful", &rules);
        assert!(matched.corrective && matched.affirmation);
        assert_eq!(label, InteractionType::Corrective);
    }

    #[test]
    fn no_match_falls_through_to_neutral() {
        let rules = RuleSet::demo();
        let (label, matched) = classify_body("the sky is clear today", &rules);
        assert_eq!(label, InteractionType::Neutral);
        assert_eq!(matched, MatchedFamilies::default());
    }

    #[test]
    fn corrective_only_records_single_family() {
        let rules = RuleSet::demo();
        let (label, matched) = classify_body("please reconsider", &rules);
        assert_eq!(label, InteractionType::Corrective);
        assert_eq!(
            matched,
            MatchedFamilies {
                corrective: true,
                ..Default::default()
            }
        );
    }

    #[test]
    fn frequency_table_sums_to_comment_count() {
        let rules = RuleSet::demo();
        let comments = vec![
            comment("c1", "terrible idea"),
            comment("c2", "be careful with that"),
            comment("c3", "nice work"),
            comment("c4", "just passing by"),
        ];
        let (labeled, freq) = classify_all(&comments, &rules);
        assert_eq!(labeled.len(), 4);
        assert_eq!(
            freq,
            LabelFrequencies {
                adverse: 1,
                corrective: 1,
                affirmation: 1,
                neutral: 1
            }
        );
        assert_eq!(freq.total(), comments.len());
    }

    #[test]
    fn empty_bodies_are_neutral() {
        let rules = RuleSet::demo();
        let comments = vec![comment("c1", ""), comment("c2", "")];
        let (_, freq) = classify_all(&comments, &rules);
        assert_eq!(freq.neutral, 2);
    }

    #[test]
    fn invalid_rule_names_row() {
        let csv = "family,regex\ncorrective,(\n";
        match RuleSet::from_csv_reader(csv.as_bytes()).unwrap_err() {
            RuleSetError::BadPattern { index, family, .. } => {
                assert_eq!(index, 1);
                assert_eq!(family, "corrective");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    proptest! {
        #[test]
        fn every_body_gets_exactly_one_label(body in ".{0,160}") {
            let rules = RuleSet::demo();
            let (label, matched) = classify_body(&body, &rules);
            // precedence soundness
            let expected = if matched.adverse {
                InteractionType::Adverse
            } else if matched.corrective {
                InteractionType::Corrective
            } else if matched.affirmation {
                InteractionType::Affirmation
            } else {
                InteractionType::Neutral
            };
            prop_assert_eq!(label, expected);
        }
    }
}
