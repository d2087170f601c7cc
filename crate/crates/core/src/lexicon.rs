//! Directive-intensity scoring against an auditable regex lexicon.
//!
//! A lexicon is an ordered list of case-insensitive patterns in two
//! categories, `action` and `sensitive`. The directive intensity of a text
//! is the capped sum of category match counts:
//!
//! ```text
//! di = min(matches_action + matches_sensitive, cap)
//! ```
//!
//! By default a pattern contributes at most 1 regardless of how many times
//! it occurs (`CountMode::Patterns`); occurrence counting is available for
//! sensitivity analysis. Text is normalized to NFC before matching. Posts
//! are scored over `title + " " + body`, comments over the body alone.

use std::io::Read;

use regex::RegexBuilder;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

use crate::archive::{CommentRecord, PostRecord};

/// Demonstration lexicon bundled for tests and synthetic archives.
pub const DEMO_LEXICON_CSV: &str = include_str!("../data/di_lexicon.csv");

pub const DEFAULT_CAP: u32 = 10;

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("lexicon schema mismatch: {0}")]
    Schema(String),
    #[error("pattern {pattern_id:?} does not compile: {message}")]
    BadPattern { pattern_id: String, message: String },
    #[error("pattern {pattern_id:?} has unknown category {category:?}")]
    UnknownCategory { pattern_id: String, category: String },
    #[error("duplicate pattern_id {0:?}")]
    DuplicateId(String),
    #[error("lexicon is empty")]
    Empty,
    #[error("cap must be at least 1")]
    ZeroCap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatternCategory {
    Action,
    Sensitive,
}

#[derive(Debug, Clone)]
pub struct LexiconPattern {
    pub pattern_id: String,
    pub category: PatternCategory,
    pub source: String,
    regex: regex::Regex,
}

#[derive(Debug, Clone)]
pub struct Lexicon {
    patterns: Vec<LexiconPattern>,
    pub cap: u32,
}

/// How often a single pattern may count toward the score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountMode {
    /// Count each pattern at most once (number of patterns with >= 1 match).
    #[default]
    Patterns,
    /// Count every occurrence of every pattern.
    Occurrences,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TextScore {
    pub matches_action: u32,
    pub matches_sensitive: u32,
    pub di: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ItemKind {
    Post,
    Comment,
}

/// Per-item directive-intensity score.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DirectiveScore {
    pub item_id: String,
    pub kind: ItemKind,
    pub matches_action: u32,
    pub matches_sensitive: u32,
    pub di: u32,
}

#[derive(Debug, Deserialize)]
struct RawPattern {
    pattern_id: String,
    category: String,
    regex: String,
}

pub fn compile_case_insensitive(pattern: &str) -> Result<regex::Regex, regex::Error> {
    RegexBuilder::new(pattern).case_insensitive(true).build()
}

pub(crate) fn nfc(text: &str) -> String {
    text.nfc().collect()
}

impl Lexicon {
    /// Load a lexicon from CSV with header `pattern_id,category,regex`.
    pub fn from_csv_reader<R: Read>(reader: R, cap: u32) -> Result<Self, LexiconError> {
        if cap == 0 {
            return Err(LexiconError::ZeroCap);
        }
        let mut rdr = csv::Reader::from_reader(reader);
        let mut patterns: Vec<LexiconPattern> = Vec::new();
        for rec in rdr.deserialize::<RawPattern>() {
            let raw = rec.map_err(|e| LexiconError::Schema(e.to_string()))?;
            let category = match raw.category.as_str() {
                "action" => PatternCategory::Action,
                "sensitive" => PatternCategory::Sensitive,
                other => {
                    return Err(LexiconError::UnknownCategory {
                        pattern_id: raw.pattern_id,
                        category: other.to_string(),
                    })
                }
            };
            if patterns.iter().any(|p| p.pattern_id == raw.pattern_id) {
                return Err(LexiconError::DuplicateId(raw.pattern_id));
            }
            let regex =
                compile_case_insensitive(&raw.regex).map_err(|e| LexiconError::BadPattern {
                    pattern_id: raw.pattern_id.clone(),
                    message: e.to_string(),
                })?;
            patterns.push(LexiconPattern {
                pattern_id: raw.pattern_id,
                category,
                source: raw.regex,
                regex,
            });
        }
        if patterns.is_empty() {
            return Err(LexiconError::Empty);
        }
        Ok(Lexicon { patterns, cap })
    }

    /// The bundled demonstration lexicon.
    pub fn demo() -> Self {
        Self::from_csv_reader(DEMO_LEXICON_CSV.as_bytes(), DEFAULT_CAP)
            .expect("bundled lexicon is valid")
    }

    pub fn patterns(&self) -> &[LexiconPattern] {
        &self.patterns
    }

    /// (action, sensitive) pattern counts.
    pub fn counts(&self) -> (usize, usize) {
        let action = self
            .patterns
            .iter()
            .filter(|p| p.category == PatternCategory::Action)
            .count();
        (action, self.patterns.len() - action)
    }

    pub fn score_text(&self, text: &str, mode: CountMode) -> TextScore {
        let text = nfc(text);
        let mut matches_action = 0u32;
        let mut matches_sensitive = 0u32;
        for p in &self.patterns {
            let hits = match mode {
                CountMode::Patterns => u32::from(p.regex.is_match(&text)),
                CountMode::Occurrences => p.regex.find_iter(&text).count() as u32,
            };
            match p.category {
                PatternCategory::Action => matches_action += hits,
                PatternCategory::Sensitive => matches_sensitive += hits,
            }
        }
        TextScore {
            matches_action,
            matches_sensitive,
            di: (matches_action + matches_sensitive).min(self.cap),
        }
    }
}

/// Score posts over concatenated title and body (single-space separator).
pub fn score_posts(posts: &[PostRecord], lexicon: &Lexicon, mode: CountMode) -> Vec<DirectiveScore> {
    posts
        .iter()
        .map(|p| {
            let text = format!("{} {}", p.title, p.body);
            let s = lexicon.score_text(&text, mode);
            DirectiveScore {
                item_id: p.post_id.clone(),
                kind: ItemKind::Post,
                matches_action: s.matches_action,
                matches_sensitive: s.matches_sensitive,
                di: s.di,
            }
        })
        .collect()
}

/// Score comments over the body alone.
pub fn score_comments(
    comments: &[CommentRecord],
    lexicon: &Lexicon,
    mode: CountMode,
) -> Vec<DirectiveScore> {
    comments
        .iter()
        .map(|c| {
            let s = lexicon.score_text(&c.body, mode);
            DirectiveScore {
                item_id: c.comment_id.clone(),
                kind: ItemKind::Comment,
                matches_action: s.matches_action,
                matches_sensitive: s.matches_sensitive,
                di: s.di,
            }
        })
        .collect()
}
