//! Fixed-width text tables for reports. Output depends only on the report
//! contents, so it is stable byte for byte.

use std::fmt::Write;

use crate::agreement::AgreementReport;
use crate::corpus::{Annotation, CorpusStats, LintFinding};
use crate::eval_e2e::E2EReport;
use crate::eval_norm::NormEvalReport;
use crate::suggestion::{Suggestion, SuggestionResult};
use crate::vocabulary::IndexStats;

#[derive(Clone, Copy, PartialEq, Eq)]
enum Align {
    Left,
    Right,
}

struct Table {
    headers: Vec<String>,
    align: Vec<Align>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new(headers: &[&str], align: &[Align]) -> Self {
        Table {
            headers: headers.iter().map(|s| s.to_string()).collect(),
            align: align.to_vec(),
            rows: Vec::new(),
        }
    }

    fn row(&mut self, cells: Vec<String>) {
        self.rows.push(cells);
    }

    fn render(&self, out: &mut String) {
        let widths: Vec<usize> = (0..self.headers.len())
            .map(|i| {
                self.rows
                    .iter()
                    .map(|r| r[i].chars().count())
                    .chain([self.headers[i].chars().count()])
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let line = |cells: &[String], out: &mut String| {
            let mut s = String::new();
            for (i, cell) in cells.iter().enumerate() {
                if i > 0 {
                    s.push_str("  ");
                }
                let pad = widths[i] - cell.chars().count();
                match self.align[i] {
                    Align::Left => {
                        s.push_str(cell);
                        s.extend(std::iter::repeat_n(' ', pad));
                    }
                    Align::Right => {
                        s.extend(std::iter::repeat_n(' ', pad));
                        s.push_str(cell);
                    }
                }
            }
            out.push_str(s.trim_end());
            out.push('\n');
        };
        line(&self.headers, out);
        let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
        line(&rule, out);
        for r in &self.rows {
            line(r, out);
        }
    }
}

/// A fraction as a percentage with one decimal; `-` when undefined.
pub fn pct(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_string(), |v| format!("{:.1}", v * 100.0))
}

/// A value already expressed in percent, one decimal.
fn pct_raw(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_string(), |v| format!("{v:.1}"))
}

fn ratio(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_string(), |v| format!("{v:.3}"))
}

use Align::{Left as L, Right as R};

pub fn vocab_stats(stats: &IndexStats) -> String {
    format!(
        "concepts        {}\nterms           {}\ndistinct stems  {}\n",
        stats.concepts, stats.terms, stats.distinct_stems
    )
}

pub fn suggestions(result: &SuggestionResult) -> String {
    let mut out = String::new();
    let mut table = Table::new(&["#", "Match", "CUI", "Name", "Stems", "Concept stems", "Synonyms"], &[R, L, L, L, R, R, R]);
    let all: Vec<&Suggestion> = result.direct.iter().chain(&result.partial).collect();
    for (i, s) in all.iter().enumerate() {
        table.row(vec![
            (i + 1).to_string(),
            match s.match_kind {
                crate::suggestion::MatchKind::Direct => "direct".into(),
                crate::suggestion::MatchKind::Partial => "partial".into(),
            },
            s.cui.to_string(),
            s.display_name.clone(),
            s.score.matched_stem_count.to_string(),
            s.score.concept_stem_count.to_string(),
            s.score.synonym_count.to_string(),
        ]);
    }
    let _ = writeln!(out, "query: {:?}", result.query);
    table.render(&mut out);
    out
}

pub fn annotations(anns: &[Annotation]) -> String {
    let mut out = String::new();
    if anns.is_empty() {
        out.push_str("no annotations\n");
        return out;
    }
    let mut table = Table::new(&["Id", "Document", "Span", "Labels", "Annotator", "Status"], &[L, L, L, L, L, L]);
    for a in anns {
        let labels: Vec<String> = a.labels().iter().map(|l| l.to_string()).collect();
        table.row(vec![
            a.id.clone(),
            a.doc_id.clone(),
            format!("{}-{}", a.start, a.end),
            labels.join(","),
            a.annotator_id.clone(),
            format!("{:?}", a.status).to_lowercase(),
        ]);
    }
    table.render(&mut out);
    out
}

pub fn lint_findings(findings: &[LintFinding]) -> String {
    let mut out = String::new();
    if findings.is_empty() {
        out.push_str("no findings\n");
        return out;
    }
    let mut table = Table::new(&["Severity", "Rule", "Document", "Span", "Annotation", "Message"], &[L, L, L, L, L, L]);
    for f in findings {
        table.row(vec![
            f.severity.to_string(),
            f.rule_id.to_string(),
            f.doc_id.clone(),
            format!("{}-{}", f.start, f.end),
            f.annotation_id.clone().unwrap_or_else(|| "-".into()),
            f.message.clone(),
        ]);
    }
    table.render(&mut out);
    out
}

pub fn corpus_stats(stats: &CorpusStats) -> String {
    let mut out = String::new();
    let mut table = Table::new(&["Document", "Annotator", "Spans", "Unique CUIs"], &[L, L, R, R]);
    for r in &stats.rows {
        table.row(vec![
            r.doc_id.clone(),
            r.annotator_id.clone(),
            r.span_count.to_string(),
            r.unique_cui_count.to_string(),
        ]);
    }
    table.render(&mut out);
    out.push('\n');
    let mut table = Table::new(&["Annotator", "Spans", "Unique CUIs"], &[L, R, R]);
    for a in &stats.annotators {
        table.row(vec![a.annotator_id.clone(), a.span_count.to_string(), a.unique_cui_count.to_string()]);
    }
    table.render(&mut out);
    let t = &stats.totals;
    let _ = write!(
        out,
        "\ndocuments {}, annotators {}, spans {}, unique CUIs {}, CUI-less {}, multi-CUI {}\n",
        t.documents, t.annotators, t.span_count, t.unique_cui_count, t.cui_less_count, t.multi_cui_count
    );
    out
}

pub fn agreement(report: &AgreementReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "annotators: {} vs {}", report.annotator_a, report.annotator_b);
    let mut table = Table::new(
        &["Document", "Spans A", "Spans B", "Union", "Shared", "Jaccard", "CUI agree", "CUI agreement"],
        &[L, R, R, R, R, R, R, R],
    );
    let mut push = |name: &str, c: &crate::agreement::AgreementCounts| {
        table.row(vec![
            name.to_string(),
            c.spans_a.to_string(),
            c.spans_b.to_string(),
            c.spans_union.to_string(),
            c.spans_intersection.to_string(),
            format!("{:.3}", c.span_jaccard),
            c.cui_agreed_spans.to_string(),
            ratio(c.cui_agreement),
        ]);
    };
    for d in &report.per_document {
        push(&d.doc_id, &d.counts);
    }
    push("Total", &report.totals);
    table.render(&mut out);
    out
}

pub fn norm_report(report: &NormEvalReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "systems: {}", report.systems.join(", "));
    let mut table = Table::new(&["Subset", "Examples", "Max", "Avg", "Pooled"], &[L, R, R, R, R]);
    for row in &report.subsets {
        table.row(vec![
            row.name.clone(),
            row.example_count.to_string(),
            pct(row.max_acc),
            pct(row.avg_acc),
            pct(row.pooled_acc),
        ]);
    }
    table.render(&mut out);
    if !report.semantic_types.is_empty() {
        out.push('\n');
        let mut table = Table::new(&["Semantic type", "Examples", "Max", "Avg", "Pooled"], &[L, R, R, R, R]);
        for row in &report.semantic_types {
            table.row(vec![
                row.name.clone(),
                row.example_count.to_string(),
                pct(row.max_acc),
                pct(row.avg_acc),
                pct(row.pooled_acc),
            ]);
        }
        table.render(&mut out);
    }
    for u in &report.unknown_span_ids {
        let _ = writeln!(out, "warning: {} predicted unknown span {:?} (ignored)", u.system_id, u.span_id);
    }
    out
}

pub fn e2e_report(report: &E2EReport) -> String {
    let mut out = String::new();
    let _ = write!(out, "mode: {}", report.mode);
    if let Some(m) = report.match_mode {
        let _ = write!(out, " (match: {})", if m == crate::eval_e2e::MatchMode::Exact { "exact" } else { "overlap" });
    }
    out.push('\n');
    let mut table = Table::new(&["Semantic type", "Gold", "% Spans Correct", "% CUIs Correct", "CUI Precision"], &[L, R, R, R, R]);
    for row in std::iter::once(&report.overall).chain(&report.semantic_types) {
        table.row(vec![
            row.name.clone(),
            row.gold_count.to_string(),
            pct_raw(row.spans_correct_pct),
            pct_raw(row.cuis_correct_pct),
            pct(row.cui_precision),
        ]);
    }
    table.render(&mut out);
    if let Some(c) = &report.compound {
        let _ = write!(
            out,
            "\ncompound spans {}: recovered {}, missed {}, missed with subspan credit {}\n",
            c.maximal_compound_count, c.recovered, c.missed, c.missed_with_subspan_credit
        );
    }
    for d in &report.unknown_documents {
        let _ = writeln!(out, "warning: predictions for unknown document {d:?} (ignored)");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percent_formatting() {
        assert_eq!(pct(Some(0.75)), "75.0");
        assert_eq!(pct(Some(7.0 / 12.0)), "58.3");
        assert_eq!(pct(Some(1.0)), "100.0");
        assert_eq!(pct(None), "-");
    }

    #[test]
    fn columns_align() {
        let mut t = Table::new(&["a", "bbb"], &[L, R]);
        t.row(vec!["long".into(), "1".into()]);
        let mut out = String::new();
        t.render(&mut out);
        assert_eq!(out, "a     bbb\n----  ---\nlong    1\n");
    }
}
