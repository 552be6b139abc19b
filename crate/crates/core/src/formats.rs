//! Line-oriented input formats for the evaluators.
//!
//! * spans file (TSV): `span_id, doc_id, start, end, labels[, text]`, labels
//!   comma-separated CUIs and/or the literal `CUI-less`. The optional sixth
//!   column carries the span text; without it the text is sliced from the
//!   corpus document.
//! * prediction file (TSV): `span_id, label`.
//! * end-to-end predictions (JSON lines): `{"doc_id","start","end","cui"}`.
//!
//! Blank lines and lines starting with `#` are skipped in the TSV formats.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader, Read};

use thiserror::Error;

use crate::corpus::Corpus;
use crate::cui::Label;
use crate::eval_e2e::E2EPrediction;
use crate::eval_norm::{GoldSpan, NormRun};
use crate::text::char_slice;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{source_name}:{line}: {reason}")]
    Line {
        source_name: String,
        line: usize,
        reason: String,
    },
    #[error("{source_name}: {reason}")]
    File { source_name: String, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn line_err(source_name: &str, line: usize, reason: impl Into<String>) -> FormatError {
    FormatError::Line {
        source_name: source_name.to_string(),
        line,
        reason: reason.into(),
    }
}

/// Iterate non-blank, non-comment lines with their 1-based numbers.
fn data_lines<R: Read>(source: R, source_name: &str) -> Result<Vec<(usize, String)>, FormatError> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(source).lines().enumerate() {
        let line = line.map_err(|e| match e.kind() {
            std::io::ErrorKind::InvalidData => line_err(source_name, i + 1, "not valid UTF-8"),
            _ => FormatError::Io(e),
        })?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        out.push((i + 1, line.to_string()));
    }
    Ok(out)
}

fn parse_labels(raw: &str) -> Result<BTreeSet<Label>, String> {
    let labels: BTreeSet<Label> = raw
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<Label>().map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    if labels.is_empty() {
        return Err("no labels".into());
    }
    Ok(labels)
}

/// One row of a spans file before its text is resolved.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpanRecord {
    pub span_id: String,
    pub doc_id: String,
    pub start: usize,
    pub end: usize,
    pub labels: BTreeSet<Label>,
    pub text: Option<String>,
}

pub fn parse_spans_tsv<R: Read>(source: R, source_name: &str) -> Result<Vec<SpanRecord>, FormatError> {
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for (line, content) in data_lines(source, source_name)? {
        let cols: Vec<&str> = content.split('\t').collect();
        if !(5..=6).contains(&cols.len()) {
            return Err(line_err(source_name, line, format!("expected 5 or 6 columns, found {}", cols.len())));
        }
        let num = |i: usize, what: &str| {
            cols[i]
                .trim()
                .parse::<usize>()
                .map_err(|_| line_err(source_name, line, format!("{what} must be a non-negative integer")))
        };
        let (start, end) = (num(2, "start")?, num(3, "end")?);
        if start >= end {
            return Err(line_err(source_name, line, format!("empty span [{start}, {end})")));
        }
        let span_id = cols[0].trim().to_string();
        if span_id.is_empty() || !seen.insert(span_id.clone()) {
            return Err(line_err(source_name, line, format!("missing or repeated span id {span_id:?}")));
        }
        out.push(SpanRecord {
            span_id,
            doc_id: cols[1].trim().to_string(),
            start,
            end,
            labels: parse_labels(cols[4]).map_err(|e| line_err(source_name, line, e))?,
            text: cols.get(5).map(|t| t.to_string()),
        });
    }
    Ok(out)
}

/// Attach text to span records, from their own text column or else from the
/// corpus document.
pub fn resolve_gold_spans(records: Vec<SpanRecord>, corpus: Option<&Corpus>) -> Result<Vec<GoldSpan>, FormatError> {
    records
        .into_iter()
        .map(|r| {
            let text = match (r.text, corpus) {
                (Some(t), _) => t,
                (None, Some(c)) => {
                    let doc = c.document(&r.doc_id).ok_or_else(|| FormatError::File {
                        source_name: "spans".into(),
                        reason: format!("span {:?} refers to unknown document {:?}", r.span_id, r.doc_id),
                    })?;
                    char_slice(&doc.text, r.start, r.end)
                        .ok_or_else(|| FormatError::File {
                            source_name: "spans".into(),
                            reason: format!("span {:?} is outside document {:?}", r.span_id, r.doc_id),
                        })?
                        .to_string()
                }
                (None, None) => {
                    return Err(FormatError::File {
                        source_name: "spans".into(),
                        reason: format!("span {:?} has no text column and no corpus was given", r.span_id),
                    })
                }
            };
            let mut gold = GoldSpan {
                span_id: r.span_id,
                doc_id: r.doc_id,
                start: r.start,
                end: r.end,
                text,
                gold_cuis: BTreeSet::new(),
                cui_less: false,
            };
            for label in r.labels {
                match label {
                    Label::Cui(c) => {
                        gold.gold_cuis.insert(c);
                    }
                    Label::CuiLess => gold.cui_less = true,
                }
            }
            Ok(gold)
        })
        .collect()
}

/// Parse a `span_id<TAB>label` prediction file.
pub fn parse_pred_tsv<R: Read>(source: R, system_id: &str) -> Result<NormRun, FormatError> {
    let mut predictions = BTreeMap::new();
    for (line, content) in data_lines(source, system_id)? {
        let cols: Vec<&str> = content.split('\t').collect();
        if cols.len() != 2 {
            return Err(line_err(system_id, line, format!("expected 2 columns, found {}", cols.len())));
        }
        let label: Label = cols[1].trim().parse().map_err(|e: crate::cui::InvalidCui| line_err(system_id, line, e.to_string()))?;
        if predictions.insert(cols[0].trim().to_string(), label).is_some() {
            return Err(line_err(system_id, line, format!("repeated span id {:?}", cols[0].trim())));
        }
    }
    if predictions.is_empty() {
        return Err(FormatError::File {
            source_name: system_id.to_string(),
            reason: "no predictions".into(),
        });
    }
    Ok(NormRun {
        system_id: system_id.to_string(),
        predictions,
    })
}

/// System id for a prediction file: its name without directory or extension.
pub fn system_id_for(file_name: &str) -> String {
    let path = std::path::Path::new(file_name);
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| file_name.to_string())
}

/// Parse JSON-lines end-to-end predictions.
pub fn parse_e2e_jsonl<R: Read>(source: R, source_name: &str) -> Result<Vec<E2EPrediction>, FormatError> {
    let mut out = Vec::new();
    for (line, content) in data_lines(source, source_name)? {
        let p: E2EPrediction =
            serde_json::from_str(&content).map_err(|e| line_err(source_name, line, e.to_string()))?;
        if p.start >= p.end {
            return Err(line_err(source_name, line, format!("empty span [{}, {})", p.start, p.end)));
        }
        out.push(p);
    }
    Ok(out)
}
