use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{check_label, check_offsets, strictly_contains, Annotation, AnnotationStatus, Corpus, CorpusError};
use crate::text::{char_slice, tokenize};
use crate::vocabulary::VocabularyIndex;

/// Fraction of a CUI-less span's non-whitespace characters that its tagged
/// subspans must cover before L5 reports it as redundant.
pub const SUBSPAN_COVERAGE_THRESHOLD: f64 = 0.8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum LintRule {
    /// Offsets outside the document, empty ranges, or an unknown document.
    #[serde(rename = "L1_offsets")]
    Offsets,
    /// Neither a CUI nor the CUI-less marker.
    #[serde(rename = "L2_empty_label")]
    EmptyLabel,
    /// A CUI missing from the loaded vocabulary.
    #[serde(rename = "L3_unknown_cui")]
    UnknownCui,
    /// Text tagged once in a document but left untagged elsewhere in it.
    #[serde(rename = "L4_untagged_repeat")]
    UntaggedRepeat,
    /// A CUI-less compound whose content is already tagged by subspans.
    #[serde(rename = "L5_redundant_cuiless")]
    RedundantCuiLess,
}

impl LintRule {
    pub fn severity(self) -> Severity {
        match self {
            LintRule::Offsets | LintRule::EmptyLabel => Severity::Error,
            LintRule::UnknownCui => Severity::Warning,
            LintRule::UntaggedRepeat | LintRule::RedundantCuiLess => Severity::Info,
        }
    }

    pub fn code(self) -> &'static str {
        match self {
            LintRule::Offsets => "L1_offsets",
            LintRule::EmptyLabel => "L2_empty_label",
            LintRule::UnknownCui => "L3_unknown_cui",
            LintRule::UntaggedRepeat => "L4_untagged_repeat",
            LintRule::RedundantCuiLess => "L5_redundant_cuiless",
        }
    }
}

impl fmt::Display for LintRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
    Info,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Error => "error",
            Severity::Warning => "warning",
            Severity::Info => "info",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LintFinding {
    pub rule_id: LintRule,
    pub severity: Severity,
    /// Set when the finding is about a stored annotation; L4 findings point
    /// at an untagged text range instead.
    pub annotation_id: Option<String>,
    pub doc_id: String,
    pub start: usize,
    pub end: usize,
    pub message: String,
}

impl LintFinding {
    fn new(rule: LintRule, ann: Option<&Annotation>, doc_id: &str, range: (usize, usize), message: String) -> Self {
        LintFinding {
            rule_id: rule,
            severity: rule.severity(),
            annotation_id: ann.map(|a| a.id.clone()),
            doc_id: doc_id.to_string(),
            start: range.0,
            end: range.1,
            message,
        }
    }

    fn for_annotation(rule: LintRule, ann: &Annotation, message: String) -> Self {
        Self::new(rule, Some(ann), &ann.doc_id, ann.range(), message)
    }

    /// The L1/L2 finding behind a rejected annotation write, if the error
    /// is one of those.
    pub fn from_rejection(ann: &Annotation, err: &CorpusError) -> Option<Self> {
        let rule = match err {
            CorpusError::InvalidOffsets { .. } | CorpusError::UnknownDocument(_) => LintRule::Offsets,
            CorpusError::EmptyLabel => LintRule::EmptyLabel,
            _ => return None,
        };
        Some(Self::for_annotation(rule, ann, err.to_string()))
    }
}

/// Run every lint over the corpus. Findings are sorted by document, offsets,
/// rule and annotation id.
pub fn lint_corpus(corpus: &Corpus, idx: &VocabularyIndex) -> Vec<LintFinding> {
    let mut findings = Vec::new();
    let mut valid: Vec<&Annotation> = Vec::new();
    for ann in corpus.annotations() {
        let mut ok = true;
        match corpus.document(&ann.doc_id) {
            None => {
                ok = false;
                findings.push(LintFinding::for_annotation(
                    LintRule::Offsets,
                    ann,
                    format!("unknown document {:?}", ann.doc_id),
                ));
            }
            Some(doc) => {
                if let Err(e) = check_offsets(&doc.text, ann.start, ann.end) {
                    ok = false;
                    findings.push(LintFinding::for_annotation(LintRule::Offsets, ann, e.to_string()));
                }
            }
        }
        if let Err(e) = check_label(ann) {
            findings.push(LintFinding::for_annotation(LintRule::EmptyLabel, ann, e.to_string()));
        }
        for cui in ann.cuis.iter().filter(|c| !idx.contains(c)) {
            findings.push(LintFinding::for_annotation(
                LintRule::UnknownCui,
                ann,
                format!("{cui} is not in the vocabulary"),
            ));
        }
        if ok {
            valid.push(ann);
        }
    }

    untagged_repeats(corpus, &valid, &mut findings);
    redundant_cui_less(corpus, &valid, &mut findings);

    findings.sort_by(|a, b| {
        (&a.doc_id, a.start, a.end, a.rule_id, &a.annotation_id)
            .cmp(&(&b.doc_id, b.start, b.end, b.rule_id, &b.annotation_id))
    });
    findings
}

fn lower(s: &str) -> String {
    s.chars().flat_map(char::to_lowercase).collect()
}

/// L4: the token sequence of an accepted annotation appears elsewhere in the
/// same document with no live annotation covering that occurrence.
fn untagged_repeats(corpus: &Corpus, valid: &[&Annotation], findings: &mut Vec<LintFinding>) {
    let mut reported: BTreeSet<(String, usize, usize)> = BTreeSet::new();
    let mut seen_terms: BTreeSet<(String, Vec<String>)> = BTreeSet::new();
    for ann in valid.iter().filter(|a| a.is_accepted()) {
        let Some(doc) = corpus.document(&ann.doc_id) else { continue };
        let Some(span) = char_slice(&doc.text, ann.start, ann.end) else { continue };
        let needle: Vec<String> = tokenize(span).iter().map(|t| lower(t.text)).collect();
        if needle.is_empty() || !seen_terms.insert((doc.id.clone(), needle.clone())) {
            continue;
        }
        let hay = tokenize(&doc.text);
        let hay_lower: Vec<String> = hay.iter().map(|t| lower(t.text)).collect();
        let live: Vec<(usize, usize)> = valid
            .iter()
            .filter(|a| a.doc_id == doc.id && a.status != AnnotationStatus::Rejected)
            .map(|a| a.range())
            .collect();
        for i in 0..hay.len().saturating_sub(needle.len() - 1) {
            if hay_lower[i..i + needle.len()] != needle[..] {
                continue;
            }
            let occ = (hay[i].start, hay[i + needle.len() - 1].end);
            let covered = live.iter().any(|&(s, e)| s <= occ.0 && occ.1 <= e);
            if !covered && reported.insert((doc.id.clone(), occ.0, occ.1)) {
                findings.push(LintFinding::new(
                    LintRule::UntaggedRepeat,
                    None,
                    &doc.id,
                    occ,
                    format!("{:?} is tagged elsewhere in this document but not here", span.trim()),
                ));
            }
        }
    }
}

/// L5: a CUI-less span strictly containing two or more accepted subspans by
/// the same annotator that cover at least [`SUBSPAN_COVERAGE_THRESHOLD`] of its
/// non-whitespace characters.
fn redundant_cui_less(corpus: &Corpus, valid: &[&Annotation], findings: &mut Vec<LintFinding>) {
    for outer in valid
        .iter()
        .filter(|a| a.cui_less && a.status != AnnotationStatus::Rejected)
    {
        let inner: Vec<(usize, usize)> = valid
            .iter()
            .filter(|a| {
                a.is_accepted()
                    && a.doc_id == outer.doc_id
                    && a.annotator_id == outer.annotator_id
                    && a.id != outer.id
                    && strictly_contains(outer.range(), a.range())
            })
            .map(|a| a.range())
            .collect();
        if inner.len() < 2 {
            continue;
        }
        let Some(doc) = corpus.document(&outer.doc_id) else { continue };
        let mut content = 0usize;
        let mut covered = 0usize;
        for (offset, c) in doc.text.chars().enumerate().skip(outer.start).take(outer.end - outer.start) {
            if c.is_whitespace() {
                continue;
            }
            content += 1;
            if inner.iter().any(|&(s, e)| s <= offset && offset < e) {
                covered += 1;
            }
        }
        if content > 0 && covered as f64 >= SUBSPAN_COVERAGE_THRESHOLD * content as f64 {
            findings.push(LintFinding::for_annotation(
                LintRule::RedundantCuiLess,
                outer,
                format!(
                    "CUI-less compound is {covered}/{content} covered by {} tagged subspans",
                    inner.len()
                ),
            ));
        }
    }
}
