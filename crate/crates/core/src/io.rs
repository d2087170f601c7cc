//! Readers and writers for derived artifacts (scores, labels, plot data).

use std::io::{Read, Write};

use crate::classifier::{ClassifiedComment, InteractionType, MatchedFamilies};
use crate::inference::BinnedEstimate;
use crate::lexicon::{DirectiveScore, ItemKind};
use crate::longitudinal::{EventAlignment, FePanelRow, StrataTable};
use crate::resampling::PermutationResult;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{file} schema mismatch: {message}")]
    Schema { file: String, message: String },
}

fn schema(file: &str, message: impl ToString) -> IoError {
    IoError::Schema {
        file: file.to_string(),
        message: message.to_string(),
    }
}

pub fn write_scores_csv<W: Write>(w: W, scores: &[DirectiveScore]) -> Result<(), IoError> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["item_id", "kind", "matches_action", "matches_sensitive", "di"])?;
    for s in scores {
        wtr.write_record([
            s.item_id.as_str(),
            match s.kind {
                ItemKind::Post => "post",
                ItemKind::Comment => "comment",
            },
            &s.matches_action.to_string(),
            &s.matches_sensitive.to_string(),
            &s.di.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_scores_csv<R: Read>(r: R, file: &str) -> Result<Vec<DirectiveScore>, IoError> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| schema(file, e))?;
        let get = |idx: usize, name: &str| {
            rec.get(idx)
                .ok_or_else(|| schema(file, format!("row {}: missing {name}", i + 1)))
        };
        let kind = match get(1, "kind")? {
            "post" => ItemKind::Post,
            "comment" => ItemKind::Comment,
            other => return Err(schema(file, format!("row {}: unknown kind {other:?}", i + 1))),
        };
        let parse_u32 = |idx: usize, name: &str| -> Result<u32, IoError> {
            get(idx, name)?
                .parse()
                .map_err(|e| schema(file, format!("row {}: {name}: {e}", i + 1)))
        };
        out.push(DirectiveScore {
            item_id: get(0, "item_id")?.to_string(),
            kind,
            matches_action: parse_u32(2, "matches_action")?,
            matches_sensitive: parse_u32(3, "matches_sensitive")?,
            di: parse_u32(4, "di")?,
        });
    }
    Ok(out)
}

pub fn write_labels_csv<W: Write>(w: W, labels: &[ClassifiedComment]) -> Result<(), IoError> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["comment_id", "label", "matched_families"])?;
    for l in labels {
        wtr.write_record([
            l.comment_id.as_str(),
            l.label.as_str(),
            &l.matched_families.render(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_labels_csv<R: Read>(r: R, file: &str) -> Result<Vec<ClassifiedComment>, IoError> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| schema(file, e))?;
        let comment_id = rec
            .get(0)
            .ok_or_else(|| schema(file, format!("row {}: missing comment_id", i + 1)))?
            .to_string();
        let label_str = rec
            .get(1)
            .ok_or_else(|| schema(file, format!("row {}: missing label", i + 1)))?;
        let label = InteractionType::parse(label_str)
            .ok_or_else(|| schema(file, format!("row {}: unknown label {label_str:?}", i + 1)))?;
        let families = rec.get(2).unwrap_or("");
        let matched_families = MatchedFamilies {
            adverse: families.split('|').any(|f| f == "adverse"),
            corrective: families.split('|').any(|f| f == "corrective"),
            affirmation: families.split('|').any(|f| f == "affirmation"),
        };
        out.push(ClassifiedComment {
            comment_id,
            label,
            matched_families,
        });
    }
    Ok(out)
}

/// Read a one-column CSV of reals (header row `value` optional).
pub fn read_values_csv<R: Read>(r: R, file: &str) -> Result<Vec<f64>, IoError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_reader(r);
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| schema(file, e))?;
        let field = rec
            .get(0)
            .ok_or_else(|| schema(file, format!("row {}: empty row", i + 1)))?
            .trim();
        if i == 0 && field.parse::<f64>().is_err() {
            continue; // header row
        }
        out.push(
            field
                .parse::<f64>()
                .map_err(|e| schema(file, format!("row {}: {e}", i + 1)))?,
        );
    }
    Ok(out)
}

/// Plot data behind the binned-probability figure.
pub fn write_bins_csv<W: Write>(w: W, bins: &[BinnedEstimate]) -> Result<(), IoError> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["bin_index", "bin_rule", "di_mean", "p_hat", "lo", "hi", "k", "n"])?;
    for b in bins {
        wtr.write_record([
            b.bin_index.to_string(),
            b.bin_rule.clone(),
            b.di_mean.to_string(),
            b.wilson.p_hat.to_string(),
            b.wilson.lo.to_string(),
            b.wilson.hi.to_string(),
            b.k.to_string(),
            b.n.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Null-draw histogram data behind the permutation figure.
pub fn write_perm_csv<W: Write>(
    w: W,
    results: &[&PermutationResult],
) -> Result<(), IoError> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["statistic", "replicate", "value"])?;
    for r in results {
        let name = match r.statistic_name {
            crate::resampling::StatisticName::SimpleSlope => "simple_slope",
            crate::resampling::StatisticName::BinnedSlope => "binned_slope",
        };
        for (i, v) in r.null_draws.iter().enumerate() {
            wtr.write_record([name, &i.to_string(), &v.to_string()])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// Per-thread event-aligned deltas (regulatable threads plus the
/// exclusion census).
pub fn write_event_deltas_csv<W: Write>(w: W, alignment: &EventAlignment) -> Result<(), IoError> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record([
        "thread_id",
        "delta_mean",
        "fixed_n_delta",
        "regulatable",
        "exclusion_reason",
    ])?;
    for t in &alignment.regulatable {
        wtr.write_record([
            t.window.post_id.clone(),
            t.delta_mean.to_string(),
            t.fixed_n_delta.map(|d| d.to_string()).unwrap_or_default(),
            "1".to_string(),
            String::new(),
        ])?;
    }
    for (post_id, reason) in &alignment.excluded {
        let reason = match reason {
            crate::longitudinal::ExclusionReason::NoBeforeComments => "no_before_comments",
            crate::longitudinal::ExclusionReason::NoAfterComments => "no_after_comments",
            crate::longitudinal::ExclusionReason::NoDirectiveBefore => "no_directive_before",
        };
        wtr.write_record([post_id.as_str(), "", "", "0", reason])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_fe_panel_csv<W: Write>(w: W, panel: &[FePanelRow]) -> Result<(), IoError> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["agent_id", "item_id", "time", "y", "treated"])?;
    for r in panel {
        wtr.write_record([
            r.agent_id.as_str(),
            r.item_id.as_str(),
            &crate::archive::format_timestamp(&r.time),
            &r.y.to_string(),
            if r.treated { "1" } else { "0" },
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_strata_csv<W: Write>(w: W, table: &StrataTable) -> Result<(), IoError> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record([
        "di_bin",
        "engagement_tercile",
        "early_max_di_bin",
        "flag_type",
        "flag_value",
        "n_threads",
        "mean_esc_high",
        "n_downstream_threads",
        "mean_downstream_max_di",
        "mean_downstream_mean_di",
    ])?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for c in &table.cells {
        wtr.write_record([
            if c.stratum.di_positive { ">0" } else { "0" }.to_string(),
            c.stratum.engagement_tercile.to_string(),
            if c.stratum.early_max_di_positive { ">0" } else { "0" }.to_string(),
            match c.flag {
                crate::longitudinal::EarlyFlag::ByCount => "count",
                crate::longitudinal::EarlyFlag::ByTime => "time",
            }
            .to_string(),
            if c.flag_value { "1" } else { "0" }.to_string(),
            c.n_threads.to_string(),
            opt(c.mean_esc_high),
            c.n_downstream_threads.to_string(),
            opt(c.mean_downstream_max_di),
            opt(c.mean_downstream_mean_di),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

impl From<csv::Error> for IoError {
    fn from(e: csv::Error) -> Self {
        schema("csv", e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scores_round_trip() {
        let scores = vec![
            DirectiveScore {
                item_id: "p1".into(),
                kind: ItemKind::Post,
                matches_action: 2,
                matches_sensitive: 1,
                di: 3,
            },
            DirectiveScore {
                item_id: "c1".into(),
                kind: ItemKind::Comment,
                matches_action: 0,
                matches_sensitive: 0,
                di: 0,
            },
        ];
        let mut buf = Vec::new();
        write_scores_csv(&mut buf, &scores).unwrap();
        let back = read_scores_csv(buf.as_slice(), "test").unwrap();
        assert_eq!(back, scores);
    }

    #[test]
    fn labels_round_trip() {
        let labels = vec![ClassifiedComment {
            comment_id: "c1".into(),
            label: InteractionType::Adverse,
            matched_families: MatchedFamilies {
                adverse: true,
                corrective: true,
                affirmation: false,
            },
        }];
        let mut buf = Vec::new();
        write_labels_csv(&mut buf, &labels).unwrap();
        let back = read_labels_csv(buf.as_slice(), "test").unwrap();
        assert_eq!(back, labels);
    }

    #[test]
    fn values_accept_optional_header() {
        let with_header = "value\n1.5\n-2.0\n";
        let bare = "1.5\n-2.0\n";
        for text in [with_header, bare] {
            let v = read_values_csv(text.as_bytes(), "test").unwrap();
            assert_eq!(v, vec![1.5, -2.0]);
        }
    }
}
