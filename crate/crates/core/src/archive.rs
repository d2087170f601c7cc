//! Archive ingestion: parsing post/comment records, referential-integrity
//! checks, thread assembly, and corpus summary statistics.
//!
//! Two input layouts are accepted and sniffed automatically: CSV with a
//! header row, or line-delimited JSON with one object per line. Timestamps
//! must be ISO-8601 with an explicit UTC offset; naive timestamps are
//! rejected so that timezone skew cannot enter silently.

use std::collections::{BTreeSet, HashMap};
use std::io::Read;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ArchiveError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{source_name} schema mismatch: {message}")]
    Schema { source_name: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PostRecord {
    pub post_id: String,
    pub author_id: String,
    pub created_at: DateTime<Utc>,
    #[serde(default)]
    pub title: String,
    #[serde(default)]
    pub body: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommentRecord {
    pub comment_id: String,
    pub post_id: String,
    /// `None` means a top-level reply to the post.
    pub parent_id: Option<String>,
    pub author_id: String,
    pub created_at: DateTime<Utc>,
    #[serde(default)]
    pub body: String,
}

/// A post together with its comments, sorted by `(created_at, comment_id)`.
#[derive(Debug, Clone)]
pub struct Thread {
    pub post: PostRecord,
    pub comments: Vec<CommentRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ArchiveStats {
    pub n_posts: usize,
    pub n_comments: usize,
    pub n_agents: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordSource {
    Posts,
    Comments,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagnosticKind {
    MalformedTimestamp,
    DuplicateId,
    MissingId,
    OrphanComment,
    OrphanParent,
}

/// A positional problem found while parsing. Rows with diagnostics are
/// excluded from the record lists (orphan comments go to quarantine
/// instead so that no comment is silently dropped).
#[derive(Debug, Clone, Serialize)]
pub struct Diagnostic {
    pub source: RecordSource,
    /// 1-based data row number (header not counted).
    pub row: usize,
    pub kind: DiagnosticKind,
    pub message: String,
}

#[derive(Debug, Default)]
pub struct ParsedArchive {
    pub posts: Vec<PostRecord>,
    pub comments: Vec<CommentRecord>,
    /// Comments whose `post_id` is unknown. Reported, never threaded.
    pub quarantined: Vec<CommentRecord>,
    pub diagnostics: Vec<Diagnostic>,
}

#[derive(Debug, Deserialize)]
struct RawPost {
    post_id: String,
    author_id: String,
    created_at: String,
    #[serde(default)]
    title: String,
    #[serde(default)]
    body: String,
}

#[derive(Debug, Deserialize)]
struct RawComment {
    comment_id: String,
    post_id: String,
    #[serde(default)]
    parent_id: String,
    author_id: String,
    created_at: String,
    #[serde(default)]
    body: String,
}

fn parse_timestamp(s: &str) -> Option<DateTime<Utc>> {
    DateTime::parse_from_rfc3339(s.trim())
        .ok()
        .map(|t| t.with_timezone(&Utc))
}

fn read_rows<T: for<'de> Deserialize<'de>, R: Read>(
    mut reader: R,
    source_name: &str,
) -> Result<Vec<(usize, T)>, ArchiveError> {
    let mut buf = String::new();
    reader.read_to_string(&mut buf)?;
    let trimmed = buf.trim_start();
    if trimmed.starts_with('{') {
        // line-delimited JSON
        let mut rows = Vec::new();
        for (idx, line) in buf.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let row: T = serde_json::from_str(line).map_err(|e| ArchiveError::Schema {
                source_name: source_name.to_string(),
                message: format!("line {}: {e}", idx + 1),
            })?;
            rows.push((idx + 1, row));
        }
        Ok(rows)
    } else {
        let mut rdr = csv::ReaderBuilder::new()
            .flexible(false)
            .from_reader(buf.as_bytes());
        let mut rows = Vec::new();
        for (idx, rec) in rdr.deserialize::<T>().enumerate() {
            let row = rec.map_err(|e| ArchiveError::Schema {
                source_name: source_name.to_string(),
                message: format!("row {}: {e}", idx + 1),
            })?;
            rows.push((idx + 1, row));
        }
        Ok(rows)
    }
}

/// Parse both record streams, validate referential integrity, and collect
/// positional diagnostics. Orphan comments are quarantined rather than
/// dropped; a comment whose `parent_id` cannot be resolved within the same
/// post is kept as top-level with a diagnostic.
pub fn parse_archive<R1: Read, R2: Read>(
    posts_source: R1,
    comments_source: R2,
) -> Result<ParsedArchive, ArchiveError> {
    let mut out = ParsedArchive::default();

    let mut post_rows: HashMap<String, usize> = HashMap::new();
    for (row, raw) in read_rows::<RawPost, _>(posts_source, "posts")? {
        if raw.post_id.is_empty() {
            out.diagnostics.push(Diagnostic {
                source: RecordSource::Posts,
                row,
                kind: DiagnosticKind::MissingId,
                message: "empty post_id".to_string(),
            });
            continue;
        }
        if let Some(prev) = post_rows.get(&raw.post_id) {
            out.diagnostics.push(Diagnostic {
                source: RecordSource::Posts,
                row,
                kind: DiagnosticKind::DuplicateId,
                message: format!("post_id {:?} already seen at row {prev}", raw.post_id),
            });
            continue;
        }
        let Some(created_at) = parse_timestamp(&raw.created_at) else {
            out.diagnostics.push(Diagnostic {
                source: RecordSource::Posts,
                row,
                kind: DiagnosticKind::MalformedTimestamp,
                message: format!(
                    "post {:?}: {:?} is not an ISO-8601 timestamp with offset",
                    raw.post_id, raw.created_at
                ),
            });
            continue;
        };
        post_rows.insert(raw.post_id.clone(), row);
        out.posts.push(PostRecord {
            post_id: raw.post_id,
            author_id: raw.author_id,
            created_at,
            title: raw.title,
            body: raw.body,
        });
    }

    let mut comment_rows: HashMap<String, usize> = HashMap::new();
    let mut pending: Vec<CommentRecord> = Vec::new();
    for (row, raw) in read_rows::<RawComment, _>(comments_source, "comments")? {
        if raw.comment_id.is_empty() {
            out.diagnostics.push(Diagnostic {
                source: RecordSource::Comments,
                row,
                kind: DiagnosticKind::MissingId,
                message: "empty comment_id".to_string(),
            });
            continue;
        }
        if let Some(prev) = comment_rows.get(&raw.comment_id) {
            out.diagnostics.push(Diagnostic {
                source: RecordSource::Comments,
                row,
                kind: DiagnosticKind::DuplicateId,
                message: format!("comment_id {:?} already seen at row {prev}", raw.comment_id),
            });
            continue;
        }
        let Some(created_at) = parse_timestamp(&raw.created_at) else {
            out.diagnostics.push(Diagnostic {
                source: RecordSource::Comments,
                row,
                kind: DiagnosticKind::MalformedTimestamp,
                message: format!(
                    "comment {:?}: {:?} is not an ISO-8601 timestamp with offset",
                    raw.comment_id, raw.created_at
                ),
            });
            continue;
        };
        comment_rows.insert(raw.comment_id.clone(), row);
        let record = CommentRecord {
            comment_id: raw.comment_id,
            post_id: raw.post_id,
            parent_id: if raw.parent_id.is_empty() {
                None
            } else {
                Some(raw.parent_id)
            },
            author_id: raw.author_id,
            created_at,
            body: raw.body,
        };
        if post_rows.contains_key(&record.post_id) {
            pending.push(record);
        } else {
            out.diagnostics.push(Diagnostic {
                source: RecordSource::Comments,
                row,
                kind: DiagnosticKind::OrphanComment,
                message: format!(
                    "comment {:?} references unknown post {:?}",
                    record.comment_id, record.post_id
                ),
            });
            out.quarantined.push(record);
        }
    }

    // Resolve parent references within each post.
    let mut ids_by_post: HashMap<&str, BTreeSet<&str>> = HashMap::new();
    for c in &pending {
        ids_by_post
            .entry(c.post_id.as_str())
            .or_default()
            .insert(c.comment_id.as_str());
    }
    let unresolved: Vec<usize> = pending
        .iter()
        .enumerate()
        .filter_map(|(i, c)| {
            let parent = c.parent_id.as_deref()?;
            let known = ids_by_post
                .get(c.post_id.as_str())
                .is_some_and(|ids| ids.contains(parent));
            (!known).then_some(i)
        })
        .collect();
    for i in unresolved {
        let c = &mut pending[i];
        out.diagnostics.push(Diagnostic {
            source: RecordSource::Comments,
            row: comment_rows[&c.comment_id],
            kind: DiagnosticKind::OrphanParent,
            message: format!(
                "comment {:?} parent {:?} not found in post {:?}; treated as top-level",
                c.comment_id,
                c.parent_id.as_deref().unwrap_or(""),
                c.post_id
            ),
        });
        c.parent_id = None;
    }
    out.comments = pending;
    Ok(out)
}

/// Assemble one thread per post. Comments are ordered by `created_at`
/// ascending with ties broken by `comment_id`, and threads by
/// `(created_at, post_id)`, so the result does not depend on input row
/// order.
pub fn build_threads(posts: &[PostRecord], comments: &[CommentRecord]) -> Vec<Thread> {
    let mut by_post: HashMap<&str, Vec<&CommentRecord>> = HashMap::new();
    for c in comments {
        by_post.entry(c.post_id.as_str()).or_default().push(c);
    }
    let mut threads: Vec<Thread> = posts
        .iter()
        .map(|p| {
            let mut cs: Vec<CommentRecord> = by_post
                .get(p.post_id.as_str())
                .map(|v| v.iter().map(|c| (*c).clone()).collect())
                .unwrap_or_default();
            cs.sort_by(|a, b| {
                a.created_at
                    .cmp(&b.created_at)
                    .then_with(|| a.comment_id.cmp(&b.comment_id))
            });
            Thread {
                post: p.clone(),
                comments: cs,
            }
        })
        .collect();
    threads.sort_by(|a, b| {
        a.post
            .created_at
            .cmp(&b.post.created_at)
            .then_with(|| a.post.post_id.cmp(&b.post.post_id))
    });
    threads
}

/// Corpus counts. `n_agents` is the number of distinct authors across
/// both posts and comments.
pub fn archive_summary(posts: &[PostRecord], comments: &[CommentRecord]) -> ArchiveStats {
    let mut agents: BTreeSet<&str> = posts.iter().map(|p| p.author_id.as_str()).collect();
    agents.extend(comments.iter().map(|c| c.author_id.as_str()));
    ArchiveStats {
        n_posts: posts.len(),
        n_comments: comments.len(),
        n_agents: agents.len(),
    }
}

pub fn format_timestamp(t: &DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::Secs, true)
}

/// Write posts in the canonical CSV layout, sorted by `(created_at, post_id)`.
pub fn write_posts_csv<W: std::io::Write>(
    w: W,
    posts: &[PostRecord],
) -> Result<(), ArchiveError> {
    let mut sorted: Vec<&PostRecord> = posts.iter().collect();
    sorted.sort_by(|a, b| {
        a.created_at
            .cmp(&b.created_at)
            .then_with(|| a.post_id.cmp(&b.post_id))
    });
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["post_id", "author_id", "created_at", "title", "body"])
        .map_err(csv_io)?;
    for p in sorted {
        wtr.write_record([
            p.post_id.as_str(),
            p.author_id.as_str(),
            &format_timestamp(&p.created_at),
            p.title.as_str(),
            p.body.as_str(),
        ])
        .map_err(csv_io)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Write comments in the canonical CSV layout, sorted by
/// `(created_at, comment_id)`. Top-level comments carry an empty
/// `parent_id` field.
pub fn write_comments_csv<W: std::io::Write>(
    w: W,
    comments: &[CommentRecord],
) -> Result<(), ArchiveError> {
    let mut sorted: Vec<&CommentRecord> = comments.iter().collect();
    sorted.sort_by(|a, b| {
        a.created_at
            .cmp(&b.created_at)
            .then_with(|| a.comment_id.cmp(&b.comment_id))
    });
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record([
        "comment_id",
        "post_id",
        "parent_id",
        "author_id",
        "created_at",
        "body",
    ])
    .map_err(csv_io)?;
    for c in sorted {
        wtr.write_record([
            c.comment_id.as_str(),
            c.post_id.as_str(),
            c.parent_id.as_deref().unwrap_or(""),
            c.author_id.as_str(),
            &format_timestamp(&c.created_at),
            c.body.as_str(),
        ])
        .map_err(csv_io)?;
    }
    wtr.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> ArchiveError {
    ArchiveError::Schema {
        source_name: "output".to_string(),
        message: e.to_string(),
    }
}
