use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::Corpus;
use crate::cui::Cui;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatsRow {
    pub doc_id: String,
    pub annotator_id: String,
    pub span_count: usize,
    pub unique_cui_count: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatorStats {
    pub annotator_id: String,
    pub span_count: usize,
    pub unique_cui_count: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatsTotals {
    pub documents: usize,
    pub annotators: usize,
    pub span_count: usize,
    pub unique_cui_count: usize,
    pub cui_less_count: usize,
    pub multi_cui_count: usize,
}

/// Counts over accepted annotations.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub rows: Vec<StatsRow>,
    pub annotators: Vec<AnnotatorStats>,
    pub totals: StatsTotals,
}

/// Span and unique-CUI counts per (document, annotator), per annotator, and
/// overall. Unique CUIs are counted over the union of CUI sets.
pub fn corpus_stats(corpus: &Corpus) -> CorpusStats {
    let mut by_pair: BTreeMap<(&str, &str), (usize, BTreeSet<&Cui>)> = BTreeMap::new();
    let mut by_annotator: BTreeMap<&str, (usize, BTreeSet<&Cui>)> = BTreeMap::new();
    let mut all_cuis: BTreeSet<&Cui> = BTreeSet::new();
    let mut docs: BTreeSet<&str> = BTreeSet::new();
    let mut totals = StatsTotals::default();

    for ann in corpus.annotations().iter().filter(|a| a.is_accepted()) {
        let pair = by_pair.entry((&ann.doc_id, &ann.annotator_id)).or_default();
        pair.0 += 1;
        pair.1.extend(ann.cuis.iter());
        let person = by_annotator.entry(&ann.annotator_id).or_default();
        person.0 += 1;
        person.1.extend(ann.cuis.iter());
        all_cuis.extend(ann.cuis.iter());
        docs.insert(&ann.doc_id);
        totals.span_count += 1;
        totals.cui_less_count += usize::from(ann.cui_less);
        totals.multi_cui_count += usize::from(ann.cuis.len() > 1);
    }

    totals.documents = docs.len();
    totals.annotators = by_annotator.len();
    totals.unique_cui_count = all_cuis.len();
    CorpusStats {
        rows: by_pair
            .into_iter()
            .map(|((doc_id, annotator_id), (span_count, cuis))| StatsRow {
                doc_id: doc_id.to_string(),
                annotator_id: annotator_id.to_string(),
                span_count,
                unique_cui_count: cuis.len(),
            })
            .collect(),
        annotators: by_annotator
            .into_iter()
            .map(|(annotator_id, (span_count, cuis))| AnnotatorStats {
                annotator_id: annotator_id.to_string(),
                span_count,
                unique_cui_count: cuis.len(),
            })
            .collect(),
        totals,
    }
}
