//! Documents and span annotations.
//!
//! An annotation may carry several CUIs when more than one concept fits the
//! span equally well, and may be marked CUI-less (alone or alongside close
//! approximations). Subspans are ordinary annotations nested inside larger
//! ones; nesting is recovered from offsets.
//!
//! Offsets count Unicode scalar values and are end-exclusive.

mod io;
mod lint;
mod stats;

use std::collections::{BTreeSet, HashMap};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cui::{Cui, Label};
use crate::text::{char_len, char_slice};

pub use io::{export_corpus, import_corpus, CorpusFile, MalformedCorpusFile};
pub use lint::{lint_corpus, LintFinding, LintRule, Severity, SUBSPAN_COVERAGE_THRESHOLD};
pub use stats::{corpus_stats, AnnotatorStats, CorpusStats, StatsRow, StatsTotals};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
    #[serde(default)]
    pub note_type: Option<String>,
    #[serde(default)]
    pub section: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnnotationStatus {
    Accepted,
    Proposed,
    Rejected,
}

impl AnnotationStatus {
    pub fn can_become(self, next: AnnotationStatus) -> bool {
        matches!(
            (self, next),
            (AnnotationStatus::Proposed, AnnotationStatus::Accepted)
                | (AnnotationStatus::Proposed, AnnotationStatus::Rejected)
        )
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub id: String,
    pub doc_id: String,
    pub start: usize,
    pub end: usize,
    #[serde(default)]
    pub cuis: BTreeSet<Cui>,
    #[serde(default)]
    pub cui_less: bool,
    pub annotator_id: String,
    pub status: AnnotationStatus,
    pub created_at: DateTime<Utc>,
}

impl Annotation {
    /// CUIs plus the CUI-less marker when set.
    pub fn labels(&self) -> BTreeSet<Label> {
        let mut labels: BTreeSet<Label> = self.cuis.iter().cloned().map(Label::Cui).collect();
        if self.cui_less {
            labels.insert(Label::CuiLess);
        }
        labels
    }

    pub fn is_accepted(&self) -> bool {
        self.status == AnnotationStatus::Accepted
    }

    pub fn range(&self) -> (usize, usize) {
        (self.start, self.end)
    }
}

/// `outer` covers `inner` and the two ranges differ.
pub fn strictly_contains(outer: (usize, usize), inner: (usize, usize)) -> bool {
    outer.0 <= inner.0 && inner.1 <= outer.1 && outer != inner
}

/// The ranges share at least one position.
pub fn overlaps(a: (usize, usize), b: (usize, usize)) -> bool {
    a.0 < b.1 && b.0 < a.1
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CorpusError {
    #[error("unknown document {0:?}")]
    UnknownDocument(String),
    #[error("unknown annotation {0:?}")]
    UnknownAnnotation(String),
    #[error("document {0:?} already exists")]
    DuplicateDocument(String),
    #[error("invalid offsets [{start}, {end}) for a document of length {len}")]
    InvalidOffsets { start: usize, end: usize, len: usize },
    #[error("annotation has no CUIs and is not marked CUI-less")]
    EmptyLabel,
    #[error("duplicate annotation: {0}")]
    DuplicateAnnotation(String),
    #[error("cannot change status from {from:?} to {to:?}")]
    InvalidTransition {
        from: AnnotationStatus,
        to: AnnotationStatus,
    },
    #[error("document id {0:?} must be non-empty and use only letters, digits, '.', '_' or '-'")]
    InvalidId(String),
}

pub(crate) fn check_offsets(text: &str, start: usize, end: usize) -> Result<(), CorpusError> {
    let len = char_len(text);
    if start < end && end <= len {
        Ok(())
    } else {
        Err(CorpusError::InvalidOffsets { start, end, len })
    }
}

pub(crate) fn check_label(ann: &Annotation) -> Result<(), CorpusError> {
    if ann.cuis.is_empty() && !ann.cui_less {
        Err(CorpusError::EmptyLabel)
    } else {
        Ok(())
    }
}

/// Ids double as file names in the on-disk store, so they are restricted.
pub fn check_id(id: &str) -> Result<(), CorpusError> {
    let ok = !id.is_empty()
        && !id.starts_with('.')
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-'));
    if ok {
        Ok(())
    } else {
        Err(CorpusError::InvalidId(id.to_string()))
    }
}

/// Documents and annotations in insertion order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Corpus {
    documents: Vec<Document>,
    annotations: Vec<Annotation>,
    doc_index: HashMap<String, usize>,
}

impl Corpus {
    pub fn new() -> Self {
        Self::default()
    }

    /// Assemble a corpus without validating annotations. Only id uniqueness
    /// is enforced; [`lint_corpus`] reports everything else.
    pub fn from_parts(
        documents: Vec<Document>,
        annotations: Vec<Annotation>,
    ) -> Result<Self, CorpusError> {
        let mut corpus = Corpus::new();
        for doc in documents {
            corpus.add_document(doc)?;
        }
        let mut ids = BTreeSet::new();
        for ann in &annotations {
            if !ids.insert(ann.id.as_str()) {
                return Err(CorpusError::DuplicateAnnotation(format!("id {:?} used twice", ann.id)));
            }
        }
        corpus.annotations = annotations;
        Ok(corpus)
    }

    pub fn add_document(&mut self, doc: Document) -> Result<(), CorpusError> {
        if self.doc_index.contains_key(&doc.id) {
            return Err(CorpusError::DuplicateDocument(doc.id));
        }
        self.doc_index.insert(doc.id.clone(), self.documents.len());
        self.documents.push(doc);
        Ok(())
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn document(&self, id: &str) -> Option<&Document> {
        self.doc_index.get(id).map(|&i| &self.documents[i])
    }

    pub fn annotations(&self) -> &[Annotation] {
        &self.annotations
    }

    pub fn annotation(&self, id: &str) -> Option<&Annotation> {
        self.annotations.iter().find(|a| a.id == id)
    }

    pub fn annotations_for<'a>(&'a self, doc_id: &'a str) -> impl Iterator<Item = &'a Annotation> + 'a {
        self.annotations.iter().filter(move |a| a.doc_id == doc_id)
    }

    /// Distinct annotator ids, sorted.
    pub fn annotators(&self) -> BTreeSet<&str> {
        self.annotations.iter().map(|a| a.annotator_id.as_str()).collect()
    }

    /// Text covered by an annotation, if its offsets are valid.
    pub fn span_text(&self, ann: &Annotation) -> Option<&str> {
        let doc = self.document(&ann.doc_id)?;
        char_slice(&doc.text, ann.start, ann.end)
    }

    fn validate(&self, ann: &Annotation, replacing: Option<&str>) -> Result<(), CorpusError> {
        let doc = self
            .document(&ann.doc_id)
            .ok_or_else(|| CorpusError::UnknownDocument(ann.doc_id.clone()))?;
        check_offsets(&doc.text, ann.start, ann.end)?;
        check_label(ann)?;
        for other in &self.annotations {
            if Some(other.id.as_str()) == replacing {
                continue;
            }
            if other.id == ann.id {
                return Err(CorpusError::DuplicateAnnotation(format!("id {:?} already exists", ann.id)));
            }
            if other.doc_id == ann.doc_id
                && other.range() == ann.range()
                && other.annotator_id == ann.annotator_id
                && other.cuis == ann.cuis
                && other.cui_less == ann.cui_less
            {
                return Err(CorpusError::DuplicateAnnotation(format!(
                    "{:?} already labels [{}, {}) identically for {}",
                    other.id, ann.start, ann.end, ann.annotator_id
                )));
            }
        }
        Ok(())
    }

    /// Store a new annotation after checking offsets, labels and duplicates.
    pub fn add_annotation(&mut self, ann: Annotation) -> Result<String, CorpusError> {
        self.validate(&ann, None)?;
        let id = ann.id.clone();
        self.annotations.push(ann);
        Ok(id)
    }

    /// Replace the annotation with the same id. The status may not change
    /// through this path; use [`Corpus::set_status`].
    pub fn update_annotation(&mut self, ann: Annotation) -> Result<(), CorpusError> {
        let pos = self
            .annotations
            .iter()
            .position(|a| a.id == ann.id)
            .ok_or_else(|| CorpusError::UnknownAnnotation(ann.id.clone()))?;
        let current = self.annotations[pos].status;
        if current != ann.status && !current.can_become(ann.status) {
            return Err(CorpusError::InvalidTransition {
                from: current,
                to: ann.status,
            });
        }
        self.validate(&ann, Some(&ann.id))?;
        self.annotations[pos] = ann;
        Ok(())
    }

    pub fn remove_annotation(&mut self, id: &str) -> Result<Annotation, CorpusError> {
        let pos = self
            .annotations
            .iter()
            .position(|a| a.id == id)
            .ok_or_else(|| CorpusError::UnknownAnnotation(id.to_string()))?;
        Ok(self.annotations.remove(pos))
    }

    /// Move a proposed annotation to accepted or rejected.
    pub fn set_status(&mut self, id: &str, status: AnnotationStatus) -> Result<&Annotation, CorpusError> {
        let ann = self
            .annotations
            .iter_mut()
            .find(|a| a.id == id)
            .ok_or_else(|| CorpusError::UnknownAnnotation(id.to_string()))?;
        if !ann.status.can_become(status) {
            return Err(CorpusError::InvalidTransition {
                from: ann.status,
                to: status,
            });
        }
        ann.status = status;
        Ok(ann)
    }
}
