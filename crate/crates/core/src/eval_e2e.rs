//! Scoring of end-to-end systems, which find spans themselves and then
//! normalize them.
//!
//! Two modes are supported.
//!
//! **Lenient** scoring is for gold data with pre-identified spans. A gold span
//! with CUIs is correct when any prediction overlapping it carries one of its
//! CUIs. A CUI-less gold span is correct unless some prediction has exactly
//! its offsets with a real CUI. Extra predictions are never penalized.
//!
//! **Framework** scoring is for multi-annotator data with nested subspans.
//! The gold set is the union of the annotators' accepted annotations (merged
//! on exact offsets, labels pooled), minus spans that carry no CUI. A span is
//! recognized when a prediction matches it (exact offsets by default, or any
//! overlap), and its CUI is correct when a matching prediction carries one of
//! its CUIs. Compound spans, those that contain other gold spans and sit
//! inside none, get a separate analysis that credits a missed compound when
//! one of its subspans was found with a correct CUI.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{overlaps, strictly_contains, Annotation, Corpus};
use crate::cui::{Cui, Label};
use crate::eval_norm::GoldSpan;
use crate::vocabulary::{types_of_all, SemanticTypeSource};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct E2EPrediction {
    pub doc_id: String,
    pub start: usize,
    pub end: usize,
    pub cui: Label,
}

impl E2EPrediction {
    fn range(&self) -> (usize, usize) {
        (self.start, self.end)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchMode {
    #[default]
    Exact,
    Overlap,
}

impl MatchMode {
    fn matches(self, gold: (usize, usize), pred: (usize, usize)) -> bool {
        match self {
            MatchMode::Exact => gold == pred,
            MatchMode::Overlap => overlaps(gold, pred),
        }
    }
}

impl FromStr for MatchMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exact" => Ok(MatchMode::Exact),
            "overlap" => Ok(MatchMode::Overlap),
            other => Err(format!("unknown match mode {other:?} (expected exact or overlap)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum E2EMode {
    Lenient,
    Framework,
}

impl FromStr for E2EMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lenient" => Ok(E2EMode::Lenient),
            "framework" => Ok(E2EMode::Framework),
            other => Err(format!("unknown mode {other:?} (expected lenient or framework)")),
        }
    }
}

impl fmt::Display for E2EMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            E2EMode::Lenient => "lenient",
            E2EMode::Framework => "framework",
        })
    }
}

/// Predictions grouped by document.
struct PredIndex<'a> {
    by_doc: BTreeMap<&'a str, Vec<&'a E2EPrediction>>,
}

impl<'a> PredIndex<'a> {
    fn new(preds: &'a [E2EPrediction]) -> Self {
        let mut by_doc: BTreeMap<&str, Vec<&E2EPrediction>> = BTreeMap::new();
        for p in preds {
            by_doc.entry(p.doc_id.as_str()).or_default().push(p);
        }
        PredIndex { by_doc }
    }

    fn in_doc(&self, doc: &str) -> &[&'a E2EPrediction] {
        self.by_doc.get(doc).map(Vec::as_slice).unwrap_or(&[])
    }

    fn unknown_docs(&self, known: &BTreeSet<&str>) -> Vec<String> {
        self.by_doc
            .keys()
            .filter(|d| !known.contains(*d))
            .map(|d| d.to_string())
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpanOutcome {
    pub span_id: String,
    /// Some prediction overlapped the span (or, for CUI-less gold, the
    /// CUI-less rule held).
    pub recognized: bool,
    pub correct: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LenientResult {
    pub outcomes: Vec<SpanOutcome>,
    pub correct: usize,
    pub accuracy: Option<f64>,
    /// Documents referenced by predictions but absent from the gold set.
    pub unknown_documents: Vec<String>,
}

fn lenient_outcome(span: &GoldSpan, preds: &[&E2EPrediction]) -> SpanOutcome {
    let range = (span.start, span.end);
    let mut overlapped = false;
    let mut cui_hit = false;
    let mut exact_labeled = false;
    for p in preds {
        if overlaps(range, p.range()) {
            overlapped = true;
            if let Label::Cui(c) = &p.cui {
                cui_hit |= span.gold_cuis.contains(c);
            }
        }
        if p.range() == range && p.cui != Label::CuiLess {
            exact_labeled = true;
        }
    }
    let cui_less_ok = span.cui_less && !exact_labeled;
    SpanOutcome {
        span_id: span.span_id.clone(),
        recognized: overlapped || cui_less_ok,
        correct: cui_hit || cui_less_ok,
    }
}

/// Lenient overlap scoring of each gold span.
pub fn lenient_eval(gold: &[GoldSpan], preds: &[E2EPrediction]) -> LenientResult {
    let index = PredIndex::new(preds);
    let outcomes: Vec<SpanOutcome> = gold
        .iter()
        .map(|span| lenient_outcome(span, index.in_doc(&span.doc_id)))
        .collect();
    let correct = outcomes.iter().filter(|o| o.correct).count();
    let known: BTreeSet<&str> = gold.iter().map(|s| s.doc_id.as_str()).collect();
    LenientResult {
        correct,
        accuracy: (!gold.is_empty()).then(|| correct as f64 / gold.len() as f64),
        outcomes,
        unknown_documents: index.unknown_docs(&known),
    }
}

/// A gold span after merging annotators.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MergedSpan {
    pub doc_id: String,
    pub start: usize,
    pub end: usize,
    pub cuis: BTreeSet<Cui>,
}

impl MergedSpan {
    fn range(&self) -> (usize, usize) {
        (self.start, self.end)
    }
}

/// Union of accepted annotations, merged on exact offsets with CUI sets
/// pooled. Spans left without any CUI are dropped. Output is sorted.
pub fn merge_gold<'a>(annotations: impl IntoIterator<Item = &'a Annotation>) -> Vec<MergedSpan> {
    let mut merged: BTreeMap<(&str, usize, usize), BTreeSet<Cui>> = BTreeMap::new();
    for a in annotations.into_iter().filter(|a| a.is_accepted()) {
        merged
            .entry((a.doc_id.as_str(), a.start, a.end))
            .or_default()
            .extend(a.cuis.iter().cloned());
    }
    merged
        .into_iter()
        .filter(|(_, cuis)| !cuis.is_empty())
        .map(|((doc, start, end), cuis)| MergedSpan {
            doc_id: doc.to_string(),
            start,
            end,
            cuis,
        })
        .collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpanCredit {
    pub recognized: bool,
    pub cui_correct: bool,
}

fn framework_credit(span: &MergedSpan, preds: &[&E2EPrediction], mode: MatchMode) -> SpanCredit {
    let mut credit = SpanCredit::default();
    for p in preds.iter().filter(|p| mode.matches(span.range(), p.range())) {
        credit.recognized = true;
        if p.cui.cui().is_some_and(|c| span.cuis.contains(c)) {
            credit.cui_correct = true;
            break;
        }
    }
    credit
}

/// One line of an end-to-end report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct E2ERow {
    pub name: String,
    pub gold_count: usize,
    pub spans_correct: usize,
    pub cuis_correct: usize,
    pub spans_correct_pct: Option<f64>,
    pub cuis_correct_pct: Option<f64>,
    /// cuis_correct / spans_correct; `None` when no span was recognized.
    pub cui_precision: Option<f64>,
}

impl E2ERow {
    fn from_counts(name: &str, gold_count: usize, spans_correct: usize, cuis_correct: usize) -> Self {
        let pct = |n: usize| (gold_count > 0).then(|| 100.0 * n as f64 / gold_count as f64);
        E2ERow {
            name: name.to_string(),
            gold_count,
            spans_correct,
            cuis_correct,
            spans_correct_pct: pct(spans_correct),
            cuis_correct_pct: pct(cuis_correct),
            cui_precision: (spans_correct > 0).then(|| cuis_correct as f64 / spans_correct as f64),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompoundAnalysis {
    pub maximal_compound_count: usize,
    pub recovered: usize,
    pub missed: usize,
    pub missed_with_subspan_credit: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct E2EReport {
    pub mode: E2EMode,
    pub match_mode: Option<MatchMode>,
    pub overall: E2ERow,
    pub semtype_min_count: usize,
    pub semantic_types: Vec<E2ERow>,
    pub compound: Option<CompoundAnalysis>,
    pub unknown_documents: Vec<String>,
}

fn rows_by_type<'a>(
    spans: impl Iterator<Item = (&'a BTreeSet<Cui>, bool, bool)>,
    source: &'a dyn SemanticTypeSource,
    min: usize,
) -> Vec<E2ERow> {
    let mut tally: BTreeMap<&str, (usize, usize, usize)> = BTreeMap::new();
    for (cuis, recognized, correct) in spans {
        for t in types_of_all(source, cuis) {
            let e = tally.entry(t).or_default();
            e.0 += 1;
            e.1 += usize::from(recognized);
            e.2 += usize::from(correct);
        }
    }
    let mut rows: Vec<E2ERow> = tally
        .into_iter()
        .filter(|(_, (n, _, _))| *n >= min)
        .map(|(t, (n, s, c))| E2ERow::from_counts(t, n, s, c))
        .collect();
    rows.sort_by(|a, b| b.gold_count.cmp(&a.gold_count).then_with(|| a.name.cmp(&b.name)));
    rows
}

/// Lenient scoring packaged as a report.
pub fn lenient_report(
    gold: &[GoldSpan],
    preds: &[E2EPrediction],
    semtypes: Option<&dyn SemanticTypeSource>,
    semtype_min: usize,
) -> E2EReport {
    let result = lenient_eval(gold, preds);
    let spans_correct = result.outcomes.iter().filter(|o| o.recognized).count();
    let semantic_types = semtypes
        .map(|src| {
            rows_by_type(
                gold.iter()
                    .zip(&result.outcomes)
                    .map(|(g, o)| (&g.gold_cuis, o.recognized, o.correct)),
                src,
                semtype_min,
            )
        })
        .unwrap_or_default();
    E2EReport {
        mode: E2EMode::Lenient,
        match_mode: None,
        overall: E2ERow::from_counts("All", gold.len(), spans_correct, result.correct),
        semtype_min_count: semtype_min,
        semantic_types,
        compound: None,
        unknown_documents: result.unknown_documents,
    }
}

/// Compound-span analysis over an already merged gold set.
pub fn compound_analysis(gold: &[MergedSpan], preds: &[E2EPrediction], mode: MatchMode) -> CompoundAnalysis {
    let index = PredIndex::new(preds);
    let credits: Vec<SpanCredit> = gold
        .iter()
        .map(|g| framework_credit(g, index.in_doc(&g.doc_id), mode))
        .collect();
    compound_from_credits(gold, &credits)
}

fn compound_from_credits(gold: &[MergedSpan], credits: &[SpanCredit]) -> CompoundAnalysis {
    let mut by_doc: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, g) in gold.iter().enumerate() {
        by_doc.entry(g.doc_id.as_str()).or_default().push(i);
    }
    let mut out = CompoundAnalysis::default();
    for members in by_doc.values() {
        for &i in members {
            let outer = gold[i].range();
            let inside: Vec<usize> = members
                .iter()
                .copied()
                .filter(|&j| strictly_contains(outer, gold[j].range()))
                .collect();
            let contained = members
                .iter()
                .any(|&j| strictly_contains(gold[j].range(), outer));
            if inside.is_empty() || contained {
                continue;
            }
            out.maximal_compound_count += 1;
            if credits[i].recognized {
                out.recovered += 1;
            } else {
                out.missed += 1;
                if inside.iter().any(|&j| credits[j].cui_correct) {
                    out.missed_with_subspan_credit += 1;
                }
            }
        }
    }
    out
}

/// Framework scoring against the union of two annotators' annotations.
pub fn framework_eval(
    gold_a: &[Annotation],
    gold_b: &[Annotation],
    preds: &[E2EPrediction],
    mode: MatchMode,
    semtypes: Option<&dyn SemanticTypeSource>,
    semtype_min: usize,
) -> E2EReport {
    framework_eval_merged(&merge_gold(gold_a.iter().chain(gold_b)), preds, mode, semtypes, semtype_min)
}

/// Framework scoring against a merged gold set.
pub fn framework_eval_merged(
    gold: &[MergedSpan],
    preds: &[E2EPrediction],
    mode: MatchMode,
    semtypes: Option<&dyn SemanticTypeSource>,
    semtype_min: usize,
) -> E2EReport {
    let index = PredIndex::new(preds);
    let credits: Vec<SpanCredit> = gold
        .iter()
        .map(|g| framework_credit(g, index.in_doc(&g.doc_id), mode))
        .collect();
    let spans_correct = credits.iter().filter(|c| c.recognized).count();
    let cuis_correct = credits.iter().filter(|c| c.cui_correct).count();
    let semantic_types = semtypes
        .map(|src| {
            rows_by_type(
                gold.iter().zip(&credits).map(|(g, c)| (&g.cuis, c.recognized, c.cui_correct)),
                src,
                semtype_min,
            )
        })
        .unwrap_or_default();
    let known: BTreeSet<&str> = gold.iter().map(|g| g.doc_id.as_str()).collect();
    E2EReport {
        mode: E2EMode::Framework,
        match_mode: Some(mode),
        overall: E2ERow::from_counts("All", gold.len(), spans_correct, cuis_correct),
        semtype_min_count: semtype_min,
        semantic_types,
        compound: Some(compound_from_credits(gold, &credits)),
        unknown_documents: index.unknown_docs(&known),
    }
}

/// Gold spans for lenient scoring from a corpus: accepted annotations merged
/// on exact offsets, labels pooled. Span ids are `doc:start-end`.
pub fn lenient_gold(corpus: &Corpus) -> Vec<GoldSpan> {
    let mut merged: BTreeMap<(&str, usize, usize), GoldSpan> = BTreeMap::new();
    for a in corpus.annotations().iter().filter(|a| a.is_accepted()) {
        let entry = merged.entry((&a.doc_id, a.start, a.end)).or_insert_with(|| GoldSpan {
            span_id: format!("{}:{}-{}", a.doc_id, a.start, a.end),
            doc_id: a.doc_id.clone(),
            start: a.start,
            end: a.end,
            text: corpus.span_text(a).unwrap_or_default().to_string(),
            gold_cuis: BTreeSet::new(),
            cui_less: false,
        });
        entry.gold_cuis.extend(a.cuis.iter().cloned());
        entry.cui_less |= a.cui_less;
    }
    merged.into_values().collect()
}

/// End-to-end report against a corpus: lenient scoring uses
/// [`lenient_gold`], framework scoring the merged accepted annotations of
/// every annotator.
pub fn corpus_report(
    corpus: &Corpus,
    preds: &[E2EPrediction],
    mode: E2EMode,
    match_mode: MatchMode,
    semtypes: Option<&dyn SemanticTypeSource>,
    semtype_min: usize,
) -> E2EReport {
    match mode {
        E2EMode::Lenient => lenient_report(&lenient_gold(corpus), preds, semtypes, semtype_min),
        E2EMode::Framework => framework_eval_merged(&merge_gold(corpus.annotations()), preds, match_mode, semtypes, semtype_min),
    }
}
