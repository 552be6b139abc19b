//! Ranked concept suggestions for a highlighted span, and auto-tagging of
//! spans that map to exactly one concept.
//!
//! Suggestions come in two tiers. Direct matches are concepts that have the
//! normalized query as a synonym; they are ordered by synonym count (a proxy
//! for how common the concept is), then CUI. Partial matches come from the
//! inverted index and are ordered by
//!
//! 1. number of distinct query stems the concept matches (more first),
//! 2. total stems in the concept's stem document (fewer first),
//! 3. synonym count (more first),
//! 4. CUI.
//!
//! The chain ends at the CUI, so rankings are total and repeatable.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeSet, HashMap};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::corpus::{Annotation, AnnotationStatus, Document};
use crate::cui::Cui;
use crate::text::{normalize_term, stem_tokens, tokenize};
use crate::vocabulary::VocabularyIndex;

/// Longest n-gram, in tokens, that auto-tagging tries to match.
pub const AUTO_TAG_MAX_NGRAM: usize = 6;

/// Annotator recorded on auto-tag proposals.
pub const AUTO_TAG_ANNOTATOR: &str = "auto-tag";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchKind {
    Direct,
    Partial,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Score {
    pub matched_stem_count: u32,
    pub concept_stem_count: u32,
    pub synonym_count: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Suggestion {
    pub cui: Cui,
    pub display_name: String,
    pub match_kind: MatchKind,
    pub score: Score,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuggestionResult {
    pub query: String,
    pub direct: Vec<Suggestion>,
    pub partial: Vec<Suggestion>,
}

fn suggestion(idx: &VocabularyIndex, pos: u32, kind: MatchKind, matched: u32) -> Suggestion {
    let concept = idx.concept_at(pos);
    Suggestion {
        cui: concept.cui.clone(),
        display_name: concept.preferred_name.clone(),
        match_kind: kind,
        score: Score {
            matched_stem_count: matched,
            concept_stem_count: idx.stem_count_at(pos),
            synonym_count: concept.synonyms.len() as u32,
        },
    }
}

/// Concepts having the normalized query as a synonym.
pub fn direct_matches(idx: &VocabularyIndex, query: &str) -> Vec<Suggestion> {
    let normalized = normalize_term(query);
    let positions = idx.lookup_positions(&normalized);
    if positions.is_empty() {
        return Vec::new();
    }
    let query_stems: BTreeSet<String> = stem_tokens(query).into_iter().collect();
    let mut out: Vec<Suggestion> = positions
        .iter()
        .map(|&pos| {
            // The concept's document contains every stem of the matching synonym.
            suggestion(idx, pos, MatchKind::Direct, query_stems.len() as u32)
        })
        .collect();
    out.sort_by(|a, b| {
        b.score
            .synonym_count
            .cmp(&a.score.synonym_count)
            .then_with(|| a.cui.cmp(&b.cui))
    });
    out
}

fn partial_order(a: &Suggestion, b: &Suggestion) -> Ordering {
    let key = |s: &Suggestion| {
        (
            Reverse(s.score.matched_stem_count),
            s.score.concept_stem_count,
            Reverse(s.score.synonym_count),
        )
    };
    key(a).cmp(&key(b)).then_with(|| a.cui.cmp(&b.cui))
}

/// Every concept sharing at least one stem with the query, ranked but not
/// truncated.
pub fn index_candidates(idx: &VocabularyIndex, query: &str) -> Vec<Suggestion> {
    let stems: BTreeSet<String> = stem_tokens(query).into_iter().collect();
    let mut matched: HashMap<u32, u32> = HashMap::new();
    for stem in &stems {
        for posting in idx.postings(stem) {
            *matched.entry(posting.concept).or_default() += 1;
        }
    }
    let mut out: Vec<Suggestion> = matched
        .into_iter()
        .map(|(pos, n)| suggestion(idx, pos, MatchKind::Partial, n))
        .collect();
    out.sort_by(partial_order);
    out
}

/// The top `k` inverted-index matches.
pub fn index_matches(idx: &VocabularyIndex, query: &str, k: usize) -> Vec<Suggestion> {
    let mut out = index_candidates(idx, query);
    out.truncate(k);
    out
}

/// Direct matches plus up to `k` partial matches not already listed as direct.
pub fn suggest(idx: &VocabularyIndex, query: &str, k: usize) -> SuggestionResult {
    let direct = direct_matches(idx, query);
    let seen: BTreeSet<&Cui> = direct.iter().map(|s| &s.cui).collect();
    let partial = index_candidates(idx, query)
        .into_iter()
        .filter(|s| !seen.contains(&s.cui))
        .take(k)
        .collect();
    SuggestionResult {
        query: query.to_string(),
        direct,
        partial,
    }
}

/// Propose annotations for n-grams whose normalized text maps to exactly one
/// concept.
///
/// Scans token positions left to right; at each position the longest n-gram
/// (up to [`AUTO_TAG_MAX_NGRAM`] tokens) that is unambiguous and does not
/// overlap an existing annotation or an earlier proposal wins, and scanning
/// resumes after it. Rejected annotations still block proposals, so a
/// rejected suggestion is not offered again.
pub fn auto_tag(
    idx: &VocabularyIndex,
    doc: &Document,
    existing: &[Annotation],
    created_at: DateTime<Utc>,
) -> Vec<Annotation> {
    let tokens = tokenize(&doc.text);
    let chars: Vec<char> = doc.text.chars().collect();
    let mut taken: Vec<(usize, usize)> = existing
        .iter()
        .filter(|a| a.doc_id == doc.id)
        .map(|a| (a.start, a.end))
        .collect();
    let overlaps = |taken: &[(usize, usize)], s: usize, e: usize| {
        taken.iter().any(|&(ts, te)| ts < e && s < te)
    };

    let mut proposals = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        let mut chosen = None;
        let max_n = AUTO_TAG_MAX_NGRAM.min(tokens.len() - i);
        for n in (1..=max_n).rev() {
            let start = tokens[i].start;
            let end = tokens[i + n - 1].end;
            if overlaps(&taken, start, end) {
                continue;
            }
            let text: String = chars[start..end].iter().collect();
            let hits = idx.lookup_positions(&normalize_term(&text));
            if hits.len() == 1 {
                chosen = Some((n, start, end, hits[0]));
                break;
            }
        }
        match chosen {
            Some((n, start, end, pos)) => {
                let cui = idx.concept_at(pos).cui.clone();
                taken.push((start, end));
                proposals.push(Annotation {
                    id: format!("autotag-{}-{}-{}", doc.id, start, end),
                    doc_id: doc.id.clone(),
                    start,
                    end,
                    cuis: BTreeSet::from([cui]),
                    cui_less: false,
                    annotator_id: AUTO_TAG_ANNOTATOR.to_string(),
                    status: AnnotationStatus::Proposed,
                    created_at,
                });
                i += n;
            }
            None => i += 1,
        }
    }
    proposals
}
