//! Evaluation of normalization systems on pre-identified gold spans.
//!
//! Every system predicts one label per span. Accuracy is reported three
//! ways over the full test set and over subsets that isolate rarer or harder
//! cases:
//!
//! * **max**: the best single system's accuracy,
//! * **avg**: the mean accuracy across systems,
//! * **pooled**: the fraction of spans that at least one system got right.
//!
//! By construction `pooled >= max >= avg` on every row.
//!
//! Subsets are computed from a training set and (optionally) the vocabulary:
//!
//! | subset | span is in it when |
//! |---|---|
//! | All | always |
//! | Top 100 CUI | a gold CUI is among the 100 most frequent training CUIs |
//! | Multi-word | its preprocessed text has two or more words |
//! | Unseen Text | its preprocessed text never occurs in training |
//! | Unseen CUI | none of its gold labels occurs in training |
//! | Not Direct Match | its preprocessed text is not a vocabulary synonym |
//! | Unpopular CUI | its text occurs in training and is mapped strictly more often to some other label |

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cui::{Cui, Label};
use crate::text::normalize_term;
use crate::vocabulary::{types_of_all, SemanticTypeSource, VocabularyIndex};

/// Number of most frequent training CUIs forming the Top 100 CUI subset.
pub const TOP_CUI_COUNT: usize = 100;

/// Default minimum number of spans for a semantic type to get its own row.
pub const DEFAULT_SEMTYPE_MIN: usize = 50;

/// Leading words stripped from span text before analysis.
pub const POSSESSIVE_PRONOUNS: [&str; 7] = ["his", "her", "their", "my", "your", "our", "its"];

#[derive(Debug, Error, PartialEq, Eq)]
pub enum NormEvalError {
    #[error("no system runs to evaluate")]
    NoRuns,
    #[error("the training set is empty")]
    EmptyTrainingSet,
    #[error("span id {0:?} appears more than once in the gold set")]
    DuplicateSpanId(String),
    #[error("gold span {0:?} has no label")]
    EmptyGoldLabel(String),
}

/// A gold span with its reference labels. Under the amended framework a span
/// may carry several CUIs, or CUIs together with the CUI-less marker.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldSpan {
    pub span_id: String,
    pub doc_id: String,
    pub start: usize,
    pub end: usize,
    pub text: String,
    pub gold_cuis: BTreeSet<Cui>,
    pub cui_less: bool,
}

impl GoldSpan {
    pub fn labels(&self) -> BTreeSet<Label> {
        let mut out: BTreeSet<Label> = self.gold_cuis.iter().cloned().map(Label::Cui).collect();
        if self.cui_less {
            out.insert(Label::CuiLess);
        }
        out
    }

    pub fn is_correct(&self, prediction: &Label) -> bool {
        match prediction {
            Label::Cui(c) => self.gold_cuis.contains(c),
            Label::CuiLess => self.cui_less,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormRun {
    pub system_id: String,
    pub predictions: BTreeMap<String, Label>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Subset {
    All,
    Top100Cui,
    MultiWord,
    UnseenText,
    UnseenCui,
    NotDirectMatch,
    UnpopularCui,
}

impl Subset {
    pub const ALL: [Subset; 7] = [
        Subset::All,
        Subset::Top100Cui,
        Subset::MultiWord,
        Subset::UnseenText,
        Subset::UnseenCui,
        Subset::NotDirectMatch,
        Subset::UnpopularCui,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Subset::All => "All",
            Subset::Top100Cui => "Top 100 CUI",
            Subset::MultiWord => "Multi-word",
            Subset::UnseenText => "Unseen Text",
            Subset::UnseenCui => "Unseen CUI",
            Subset::NotDirectMatch => "Not Direct Match",
            Subset::UnpopularCui => "Unpopular CUI",
        }
    }
}

impl fmt::Display for Subset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Subset membership per span id.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsetAssignment {
    /// Subsets that could be computed. Not Direct Match needs a vocabulary.
    pub computed: BTreeSet<Subset>,
    pub membership: BTreeMap<String, BTreeSet<Subset>>,
}

impl SubsetAssignment {
    pub fn contains(&self, span_id: &str, subset: Subset) -> bool {
        subset == Subset::All
            || self
                .membership
                .get(span_id)
                .is_some_and(|s| s.contains(&subset))
    }
}

/// Normalize and drop a leading possessive pronoun.
///
/// ```
/// # use cuiwb_core::eval_norm::preprocess_span_text;
/// assert_eq!(preprocess_span_text("Her  Diabetes"), "diabetes");
/// assert_eq!(preprocess_span_text("history of her"), "history of her");
/// ```
pub fn preprocess_span_text(raw: &str) -> String {
    let normalized = normalize_term(raw);
    match normalized.split_once(' ') {
        Some((first, rest)) if POSSESSIVE_PRONOUNS.contains(&first) => rest.to_string(),
        _ => normalized,
    }
}

/// Training statistics the subsets are defined against.
struct TrainingProfile {
    top_cuis: BTreeSet<Cui>,
    labels: BTreeSet<Label>,
    text_labels: HashMap<String, HashMap<Label, usize>>,
}

impl TrainingProfile {
    fn new(train: &[GoldSpan]) -> Self {
        let mut cui_freq: HashMap<&Cui, usize> = HashMap::new();
        let mut labels = BTreeSet::new();
        let mut text_labels: HashMap<String, HashMap<Label, usize>> = HashMap::new();
        for span in train {
            for cui in &span.gold_cuis {
                *cui_freq.entry(cui).or_default() += 1;
            }
            let per_text = text_labels.entry(preprocess_span_text(&span.text)).or_default();
            for label in span.labels() {
                *per_text.entry(label.clone()).or_default() += 1;
                labels.insert(label);
            }
        }
        let mut ranked: Vec<(&Cui, usize)> = cui_freq.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        let top_cuis = ranked.into_iter().take(TOP_CUI_COUNT).map(|(c, _)| c.clone()).collect();
        TrainingProfile {
            top_cuis,
            labels,
            text_labels,
        }
    }

    fn unpopular(&self, text: &str, gold: &BTreeSet<Label>) -> bool {
        let Some(counts) = self.text_labels.get(text) else {
            return false;
        };
        let best_gold = gold.iter().map(|g| counts.get(g).copied().unwrap_or(0)).max().unwrap_or(0);
        counts
            .iter()
            .any(|(label, &n)| !gold.contains(label) && n > best_gold)
    }
}

/// Decide which subsets each test span belongs to.
///
/// Without a vocabulary the Not Direct Match subset is not computed.
pub fn assign_subsets(
    train: &[GoldSpan],
    test: &[GoldSpan],
    idx: Option<&VocabularyIndex>,
) -> Result<SubsetAssignment, NormEvalError> {
    if train.is_empty() {
        return Err(NormEvalError::EmptyTrainingSet);
    }
    let profile = TrainingProfile::new(train);
    let mut computed: BTreeSet<Subset> = Subset::ALL.into_iter().collect();
    if idx.is_none() {
        computed.remove(&Subset::NotDirectMatch);
    }

    let mut membership = BTreeMap::new();
    for span in test {
        let text = preprocess_span_text(&span.text);
        let labels = span.labels();
        let mut flags = BTreeSet::from([Subset::All]);
        if span.gold_cuis.iter().any(|c| profile.top_cuis.contains(c)) {
            flags.insert(Subset::Top100Cui);
        }
        if text.split(' ').filter(|w| !w.is_empty()).count() >= 2 {
            flags.insert(Subset::MultiWord);
        }
        if !profile.text_labels.contains_key(&text) {
            flags.insert(Subset::UnseenText);
        }
        if labels.is_disjoint(&profile.labels) {
            flags.insert(Subset::UnseenCui);
        }
        if let Some(idx) = idx {
            if idx.lookup_positions(&text).is_empty() {
                flags.insert(Subset::NotDirectMatch);
            }
        }
        if profile.unpopular(&text, &labels) {
            flags.insert(Subset::UnpopularCui);
        }
        membership.insert(span.span_id.clone(), flags);
    }
    Ok(SubsetAssignment { computed, membership })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemScore {
    pub system_id: String,
    pub correct: usize,
    pub accuracy: Option<f64>,
}

/// One row of the report. Accuracies are `None` when the row has no spans.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormRow {
    pub name: String,
    pub example_count: usize,
    pub max_acc: Option<f64>,
    pub avg_acc: Option<f64>,
    pub pooled_acc: Option<f64>,
    pub pooled_correct: usize,
    pub systems: Vec<SystemScore>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnknownPrediction {
    pub system_id: String,
    pub span_id: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormEvalReport {
    pub systems: Vec<String>,
    pub subsets: Vec<NormRow>,
    pub semtype_min_count: usize,
    pub semantic_types: Vec<NormRow>,
    /// Predictions for span ids not in the gold set; they were ignored.
    pub unknown_span_ids: Vec<UnknownPrediction>,
}

fn score_row(name: &str, spans: &[usize], correct: &[Vec<bool>], runs: &[NormRun]) -> NormRow {
    let n = spans.len();
    let counts: Vec<usize> = correct
        .iter()
        .map(|by_span| spans.iter().filter(|&&i| by_span[i]).count())
        .collect();
    let pooled = spans.iter().filter(|&&i| correct.iter().any(|s| s[i])).count();
    let frac = |c: usize, d: usize| (d > 0).then(|| c as f64 / d as f64);
    let best = counts.iter().copied().max().unwrap_or(0);
    let total: usize = counts.iter().sum();
    NormRow {
        name: name.to_string(),
        example_count: n,
        max_acc: frac(best, n),
        // Mean of per-system accuracies, computed as one division so that it
        // can never round above the maximum.
        avg_acc: frac(total, n * runs.len()),
        pooled_acc: frac(pooled, n),
        pooled_correct: pooled,
        systems: runs
            .iter()
            .zip(&counts)
            .map(|(r, &c)| SystemScore {
                system_id: r.system_id.clone(),
                correct: c,
                accuracy: frac(c, n),
            })
            .collect(),
    }
}

/// Score every run on every computed subset and on each semantic type with
/// at least `semtype_min` spans. A missing prediction counts as wrong.
pub fn evaluate_norm(
    gold: &[GoldSpan],
    runs: &[NormRun],
    assignment: &SubsetAssignment,
    semtypes: Option<&dyn SemanticTypeSource>,
    semtype_min: usize,
) -> Result<NormEvalReport, NormEvalError> {
    if runs.is_empty() {
        return Err(NormEvalError::NoRuns);
    }
    let mut ids = BTreeSet::new();
    for span in gold {
        if !ids.insert(span.span_id.as_str()) {
            return Err(NormEvalError::DuplicateSpanId(span.span_id.clone()));
        }
        if span.gold_cuis.is_empty() && !span.cui_less {
            return Err(NormEvalError::EmptyGoldLabel(span.span_id.clone()));
        }
    }

    let mut unknown = Vec::new();
    for run in runs {
        for span_id in run.predictions.keys() {
            if !ids.contains(span_id.as_str()) {
                unknown.push(UnknownPrediction {
                    system_id: run.system_id.clone(),
                    span_id: span_id.clone(),
                });
            }
        }
    }

    let correct: Vec<Vec<bool>> = runs
        .iter()
        .map(|run| {
            gold.iter()
                .map(|span| run.predictions.get(&span.span_id).is_some_and(|p| span.is_correct(p)))
                .collect()
        })
        .collect();

    let subsets = Subset::ALL
        .into_iter()
        .filter(|s| *s == Subset::All || assignment.computed.contains(s))
        .map(|subset| {
            let members: Vec<usize> = (0..gold.len())
                .filter(|&i| assignment.contains(&gold[i].span_id, subset))
                .collect();
            score_row(subset.label(), &members, &correct, runs)
        })
        .collect();

    let mut semantic_types = Vec::new();
    if let Some(source) = semtypes {
        let mut by_type: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, span) in gold.iter().enumerate() {
            for t in types_of_all(source, &span.gold_cuis) {
                by_type.entry(t).or_default().push(i);
            }
        }
        let mut rows: Vec<NormRow> = by_type
            .into_iter()
            .filter(|(_, members)| members.len() >= semtype_min)
            .map(|(t, members)| score_row(t, &members, &correct, runs))
            .collect();
        rows.sort_by(|a, b| b.example_count.cmp(&a.example_count).then_with(|| a.name.cmp(&b.name)));
        semantic_types = rows;
    }

    Ok(NormEvalReport {
        systems: runs.iter().map(|r| r.system_id.clone()).collect(),
        subsets,
        semtype_min_count: semtype_min,
        semantic_types,
        unknown_span_ids: unknown,
    })
}

/// Assign subsets against `train` and score `runs` on `gold`, taking semantic
/// types and the direct-match subset from `idx` when given.
pub fn norm_report(
    train: &[GoldSpan],
    gold: &[GoldSpan],
    runs: &[NormRun],
    idx: Option<&VocabularyIndex>,
    semtype_min: usize,
) -> Result<NormEvalReport, NormEvalError> {
    let assignment = assign_subsets(train, gold, idx)?;
    evaluate_norm(
        gold,
        runs,
        &assignment,
        idx.map(|i| i as &dyn SemanticTypeSource),
        semtype_min,
    )
}
