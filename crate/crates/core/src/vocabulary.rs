//! Vocabulary ingestion and the two retrieval structures behind suggestions:
//! an exact lookup table from normalized term text to CUIs, and an inverted
//! index from stems to the concepts whose synonym text contains them.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{BufRead, BufReader, Read};

use serde::Serialize;
use thiserror::Error;

use crate::cui::{Cui, InvalidCui};
use crate::text::{normalize_term, stem_tokens};

#[derive(Debug, Error)]
pub enum VocabError {
    #[error("line {line}: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("line {line}: {cui} already has preferred name {existing:?}, got {found:?}")]
    DuplicatePreferred {
        line: usize,
        cui: Cui,
        existing: String,
        found: String,
    },
    #[error("vocabulary is empty")]
    EmptyVocabulary,
    #[error("unknown CUI {0}")]
    UnknownCui(Cui),
    #[error("vocabulary is not valid UTF-8 near line {line}")]
    Encoding { line: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Concept {
    pub cui: Cui,
    pub preferred_name: String,
    /// Distinct surface strings, preferred name included.
    pub synonyms: BTreeSet<String>,
    pub semantic_types: BTreeSet<String>,
    pub source: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ConceptSet {
    concepts: BTreeMap<Cui, Concept>,
}

impl ConceptSet {
    pub fn get(&self, cui: &Cui) -> Option<&Concept> {
        self.concepts.get(cui)
    }

    pub fn contains(&self, cui: &Cui) -> bool {
        self.concepts.contains_key(cui)
    }

    pub fn len(&self) -> usize {
        self.concepts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.concepts.is_empty()
    }

    /// Concepts in CUI order.
    pub fn iter(&self) -> impl Iterator<Item = &Concept> {
        self.concepts.values()
    }

    /// Build a set from already-assembled concepts, checking the concept
    /// invariants. Later duplicates of a CUI are rejected.
    pub fn from_concepts(concepts: impl IntoIterator<Item = Concept>) -> Result<Self, VocabError> {
        let mut map = BTreeMap::new();
        for (i, mut c) in concepts.into_iter().enumerate() {
            let line = i + 1;
            if c.preferred_name.trim().is_empty() {
                return Err(malformed(line, "empty preferred name"));
            }
            if c.semantic_types.is_empty() {
                return Err(malformed(line, "no semantic types"));
            }
            c.synonyms.insert(c.preferred_name.clone());
            if map.contains_key(&c.cui) {
                return Err(malformed(line, format!("duplicate concept {}", c.cui)));
            }
            map.insert(c.cui.clone(), c);
        }
        Ok(ConceptSet { concepts: map })
    }
}

fn malformed(line: usize, reason: impl Into<String>) -> VocabError {
    VocabError::MalformedRow {
        line,
        reason: reason.into(),
    }
}

#[derive(Default)]
struct PartialConcept {
    preferred: Option<String>,
    first_term: String,
    synonyms: BTreeSet<String>,
    semantic_types: BTreeSet<String>,
    source: String,
}

/// Parse the tab-separated vocabulary format:
/// `CUI, term, preferred (0|1), semantic types (comma-separated), source`.
///
/// Rows sharing a CUI are merged. A CUI with no row flagged preferred takes
/// its first term as the preferred name.
pub fn parse_vocab_file<R: Read>(source: R) -> Result<ConceptSet, VocabError> {
    let mut partial: BTreeMap<Cui, PartialConcept> = BTreeMap::new();
    let mut reader = BufReader::new(source);
    let mut buf = Vec::new();
    let mut line_no = 0;
    loop {
        buf.clear();
        if reader.read_until(b'\n', &mut buf)? == 0 {
            break;
        }
        line_no += 1;
        let line = std::str::from_utf8(&buf).map_err(|_| VocabError::Encoding { line: line_no })?;
        let line = line.trim_end_matches(['\n', '\r']);
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 5 {
            return Err(malformed(
                line_no,
                format!("expected 5 tab-separated columns, found {}", cols.len()),
            ));
        }
        let raw_cui = cols[0].trim();
        if raw_cui.is_empty() {
            return Err(malformed(line_no, "empty CUI"));
        }
        let cui = Cui::new(raw_cui).map_err(|InvalidCui(c)| malformed(line_no, format!("invalid CUI {c:?}")))?;
        let term = cols[1].trim();
        if term.is_empty() {
            return Err(malformed(line_no, "empty term"));
        }
        let preferred = match cols[2].trim() {
            "1" => true,
            "0" => false,
            other => return Err(malformed(line_no, format!("preferred flag must be 0 or 1, got {other:?}"))),
        };
        let types: Vec<&str> = cols[3].split(',').map(str::trim).filter(|t| !t.is_empty()).collect();
        if types.is_empty() {
            return Err(malformed(line_no, "no semantic types"));
        }

        let entry = partial.entry(cui.clone()).or_default();
        if entry.first_term.is_empty() {
            entry.first_term = term.to_string();
            entry.source = cols[4].trim().to_string();
        }
        if preferred {
            match &entry.preferred {
                Some(existing) if existing != term => {
                    return Err(VocabError::DuplicatePreferred {
                        line: line_no,
                        cui,
                        existing: existing.clone(),
                        found: term.to_string(),
                    })
                }
                _ => entry.preferred = Some(term.to_string()),
            }
        }
        entry.synonyms.insert(term.to_string());
        entry.semantic_types.extend(types.into_iter().map(str::to_string));
    }
    if partial.is_empty() {
        return Err(VocabError::EmptyVocabulary);
    }
    let concepts = partial
        .into_iter()
        .map(|(cui, p)| {
            let preferred_name = p.preferred.unwrap_or(p.first_term);
            (
                cui.clone(),
                Concept {
                    cui,
                    preferred_name,
                    synonyms: p.synonyms,
                    semantic_types: p.semantic_types,
                    source: p.source,
                },
            )
        })
        .collect();
    Ok(ConceptSet { concepts })
}

/// One entry of an inverted-index posting list.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Posting {
    /// Position of the concept in [`VocabularyIndex::concept`] order.
    pub concept: u32,
    /// Total number of stems in the concept's stem document.
    pub concept_stem_count: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct IndexStats {
    pub concepts: usize,
    pub terms: usize,
    pub distinct_stems: usize,
}

/// Immutable lookup and inverted index over a [`ConceptSet`].
///
/// Concepts are addressed internally by their position in CUI order, so
/// postings are small and iteration order is deterministic.
#[derive(Debug)]
pub struct VocabularyIndex {
    concept_set: ConceptSet,
    cuis: Vec<Cui>,
    positions: HashMap<Cui, u32>,
    lookup: HashMap<String, Vec<u32>>,
    inverted: HashMap<String, Vec<Posting>>,
    stem_counts: Vec<u32>,
    stats: IndexStats,
}

/// Build the exact-match lookup and the inverted index.
///
/// ```
/// use cuiwb_core::vocabulary::{build_index, parse_vocab_file};
/// let tsv = "C0004096\tAsthma\t1\tT047\tSNOMED\n";
/// let idx = build_index(parse_vocab_file(tsv.as_bytes()).unwrap()).unwrap();
/// assert_eq!(idx.lookup("asthma")[0].as_str(), "C0004096");
/// ```
pub fn build_index(concept_set: ConceptSet) -> Result<VocabularyIndex, VocabError> {
    if concept_set.is_empty() {
        return Err(VocabError::EmptyVocabulary);
    }
    let cuis: Vec<Cui> = concept_set.concepts.keys().cloned().collect();
    let positions = cuis
        .iter()
        .enumerate()
        .map(|(i, c)| (c.clone(), i as u32))
        .collect();

    let mut lookup: HashMap<String, Vec<u32>> = HashMap::new();
    let mut inverted: HashMap<String, Vec<Posting>> = HashMap::new();
    let mut stem_counts = Vec::with_capacity(cuis.len());
    let mut terms = 0;
    for (pos, concept) in concept_set.iter().enumerate() {
        let pos = pos as u32;
        let mut document: Vec<String> = Vec::new();
        for synonym in &concept.synonyms {
            terms += 1;
            let ids = lookup.entry(normalize_term(synonym)).or_default();
            // Concepts are visited in order, so a duplicate can only be the last entry.
            if ids.last() != Some(&pos) {
                ids.push(pos);
            }
            document.extend(stem_tokens(synonym));
        }
        let count = document.len() as u32;
        stem_counts.push(count);
        let distinct: BTreeSet<String> = document.into_iter().collect();
        for stem in distinct {
            inverted.entry(stem).or_default().push(Posting {
                concept: pos,
                concept_stem_count: count,
            });
        }
    }
    let stats = IndexStats {
        concepts: cuis.len(),
        terms,
        distinct_stems: inverted.len(),
    };
    Ok(VocabularyIndex {
        concept_set,
        cuis,
        positions,
        lookup,
        inverted,
        stem_counts,
        stats,
    })
}

impl VocabularyIndex {
    pub fn concept_set(&self) -> &ConceptSet {
        &self.concept_set
    }

    pub fn stats(&self) -> IndexStats {
        self.stats
    }

    pub fn contains(&self, cui: &Cui) -> bool {
        self.positions.contains_key(cui)
    }

    pub fn concept(&self, cui: &Cui) -> Option<&Concept> {
        self.concept_set.get(cui)
    }

    pub(crate) fn concept_at(&self, pos: u32) -> &Concept {
        // Positions come from this index, so the CUI is always present.
        &self.concept_set.concepts[&self.cuis[pos as usize]]
    }

    pub(crate) fn stem_count_at(&self, pos: u32) -> u32 {
        self.stem_counts[pos as usize]
    }

    pub(crate) fn lookup_positions(&self, normalized: &str) -> &[u32] {
        self.lookup.get(normalized).map(Vec::as_slice).unwrap_or(&[])
    }

    pub(crate) fn postings(&self, stem: &str) -> &[Posting] {
        self.inverted.get(stem).map(Vec::as_slice).unwrap_or(&[])
    }

    /// CUIs whose normalized synonyms equal `text` after normalization, in CUI order.
    pub fn lookup(&self, text: &str) -> Vec<&Cui> {
        self.lookup_positions(&normalize_term(text))
            .iter()
            .map(|&p| &self.cuis[p as usize])
            .collect()
    }

    /// CUIs whose stem document contains `stem`, in CUI order.
    pub fn posting_cuis(&self, stem: &str) -> Vec<&Cui> {
        self.postings(stem).iter().map(|p| &self.cuis[p.concept as usize]).collect()
    }

    /// Number of distinct synonym strings of `cui`, preferred name included.
    pub fn synonym_count(&self, cui: &Cui) -> Result<usize, VocabError> {
        self.concept(cui)
            .map(|c| c.synonyms.len())
            .ok_or_else(|| VocabError::UnknownCui(cui.clone()))
    }

    /// Semantic types of `cui`; empty for an unknown CUI.
    pub fn semantic_types(&self, cui: &Cui) -> Option<&BTreeSet<String>> {
        self.concept(cui).map(|c| &c.semantic_types)
    }

    /// Sorted snapshot of the lookup table, for comparisons and debugging.
    pub fn lookup_entries(&self) -> BTreeMap<&str, Vec<&Cui>> {
        self.lookup
            .iter()
            .map(|(k, v)| (k.as_str(), v.iter().map(|&p| &self.cuis[p as usize]).collect()))
            .collect()
    }

    /// Sorted snapshot of the inverted index as `stem -> [(cui, concept_stem_count)]`.
    pub fn inverted_entries(&self) -> BTreeMap<&str, Vec<(&Cui, u32)>> {
        self.inverted
            .iter()
            .map(|(k, v)| {
                (
                    k.as_str(),
                    v.iter()
                        .map(|p| (&self.cuis[p.concept as usize], p.concept_stem_count))
                        .collect(),
                )
            })
            .collect()
    }
}

/// Anything that can report the semantic types of a CUI. Evaluation reports
/// use it to slice results by type.
pub trait SemanticTypeSource {
    fn types_of(&self, cui: &Cui) -> Option<&BTreeSet<String>>;
}

impl SemanticTypeSource for VocabularyIndex {
    fn types_of(&self, cui: &Cui) -> Option<&BTreeSet<String>> {
        self.semantic_types(cui)
    }
}

impl SemanticTypeSource for BTreeMap<Cui, BTreeSet<String>> {
    fn types_of(&self, cui: &Cui) -> Option<&BTreeSet<String>> {
        self.get(cui)
    }
}

/// Union of the semantic types of `cuis`.
pub fn types_of_all<'a>(
    source: &'a dyn SemanticTypeSource,
    cuis: impl IntoIterator<Item = &'a Cui>,
) -> BTreeSet<&'a str> {
    cuis.into_iter()
        .filter_map(|c| source.types_of(c))
        .flatten()
        .map(String::as_str)
        .collect()
}
