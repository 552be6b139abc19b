//! Inter-annotator agreement: Jaccard similarity over selected spans, and
//! CUI agreement over the spans both annotators selected.
//!
//! Two spans are the same span only when document and both offsets match
//! exactly. When one annotator has several annotations on the same span
//! their labels are pooled. CUI-less acts as a label of its own that agrees
//! only with CUI-less. Only accepted annotations take part.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Annotation, Corpus};
use crate::cui::Label;

type SpanKey<'a> = (&'a str, usize, usize);

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AgreementError {
    #[error("annotator {0:?} has no annotations in this corpus")]
    UnknownAnnotator(String),
}

fn span_labels<'a>(anns: impl IntoIterator<Item = &'a Annotation>) -> BTreeMap<SpanKey<'a>, BTreeSet<Label>> {
    let mut out: BTreeMap<SpanKey<'a>, BTreeSet<Label>> = BTreeMap::new();
    for a in anns.into_iter().filter(|a| a.is_accepted()) {
        out.entry((a.doc_id.as_str(), a.start, a.end))
            .or_default()
            .extend(a.labels());
    }
    out
}

/// Counts behind both agreement figures.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AgreementCounts {
    pub spans_a: usize,
    pub spans_b: usize,
    pub spans_union: usize,
    pub spans_intersection: usize,
    pub span_jaccard: f64,
    pub concordant_spans: usize,
    pub cui_agreed_spans: usize,
    /// `None` when the annotators share no span.
    pub cui_agreement: Option<f64>,
}

impl AgreementCounts {
    fn from_maps(a: &BTreeMap<SpanKey<'_>, BTreeSet<Label>>, b: &BTreeMap<SpanKey<'_>, BTreeSet<Label>>) -> Self {
        let mut intersection = 0;
        let mut agreed = 0;
        for (key, labels_a) in a {
            if let Some(labels_b) = b.get(key) {
                intersection += 1;
                if !labels_a.is_disjoint(labels_b) {
                    agreed += 1;
                }
            }
        }
        Self::from_counts(a.len(), b.len(), intersection, agreed)
    }

    fn from_counts(spans_a: usize, spans_b: usize, intersection: usize, agreed: usize) -> Self {
        let union = spans_a + spans_b - intersection;
        AgreementCounts {
            spans_a,
            spans_b,
            spans_union: union,
            spans_intersection: intersection,
            span_jaccard: if union == 0 { 1.0 } else { intersection as f64 / union as f64 },
            concordant_spans: intersection,
            cui_agreed_spans: agreed,
            cui_agreement: (intersection > 0).then(|| agreed as f64 / intersection as f64),
        }
    }
}

/// |A ∩ B| / |A ∪ B| over exact spans; 1.0 when both are empty.
///
/// ```
/// # use cuiwb_core::agreement::span_jaccard;
/// assert_eq!(span_jaccard(&[], &[]), 1.0);
/// ```
pub fn span_jaccard(a: &[Annotation], b: &[Annotation]) -> f64 {
    AgreementCounts::from_maps(&span_labels(a), &span_labels(b)).span_jaccard
}

/// Fraction of concordant spans whose label sets intersect; `None` when
/// there are no concordant spans.
pub fn cui_agreement(a: &[Annotation], b: &[Annotation]) -> Option<f64> {
    AgreementCounts::from_maps(&span_labels(a), &span_labels(b)).cui_agreement
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DocumentAgreement {
    pub doc_id: String,
    #[serde(flatten)]
    pub counts: AgreementCounts,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub annotator_a: String,
    pub annotator_b: String,
    #[serde(flatten)]
    pub totals: AgreementCounts,
    pub per_document: Vec<DocumentAgreement>,
}

/// Agreement between two annotators over the whole corpus, with a row per
/// document that either of them annotated.
pub fn agreement_report(
    corpus: &Corpus,
    annotator_a: &str,
    annotator_b: &str,
) -> Result<AgreementReport, AgreementError> {
    let annotators = corpus.annotators();
    for who in [annotator_a, annotator_b] {
        if !annotators.contains(who) {
            return Err(AgreementError::UnknownAnnotator(who.to_string()));
        }
    }
    let anns = corpus.annotations();
    let a = span_labels(anns.iter().filter(|x| x.annotator_id == annotator_a));
    let b = span_labels(anns.iter().filter(|x| x.annotator_id == annotator_b));

    let docs: BTreeSet<&str> = a.keys().chain(b.keys()).map(|k| k.0).collect();
    let per_document = docs
        .into_iter()
        .map(|doc| {
            fn only<'a>(m: &BTreeMap<SpanKey<'a>, BTreeSet<Label>>, doc: &str) -> BTreeMap<SpanKey<'a>, BTreeSet<Label>> {
                m.iter()
                    .filter(|(k, _)| k.0 == doc)
                    .map(|(k, v)| (*k, v.clone()))
                    .collect()
            }
            DocumentAgreement {
                doc_id: doc.to_string(),
                counts: AgreementCounts::from_maps(&only(&a, doc), &only(&b, doc)),
            }
        })
        .collect();

    Ok(AgreementReport {
        annotator_a: annotator_a.to_string(),
        annotator_b: annotator_b.to_string(),
        totals: AgreementCounts::from_maps(&a, &b),
        per_document,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tests::{ann, doc};
    use crate::corpus::AnnotationStatus;

    fn by(who: &str, mut anns: Vec<Annotation>) -> Vec<Annotation> {
        for (i, a) in anns.iter_mut().enumerate() {
            a.annotator_id = who.into();
            a.id = format!("{who}-{i}");
        }
        anns
    }

    #[test]
    fn identical_sets() {
        let a = by("a", vec![ann("", "d", 0, 5, &["C0000001"])]);
        let b = by("b", a.clone());
        assert_eq!(span_jaccard(&a, &b), 1.0);
        assert_eq!(cui_agreement(&a, &b), Some(1.0));
    }

    #[test]
    fn disjoint_sets() {
        let a = by("a", vec![ann("", "d", 0, 5, &["C0000001"])]);
        let b = by("b", vec![ann("", "d", 0, 6, &["C0000001"])]);
        assert_eq!(span_jaccard(&a, &b), 0.0);
        assert_eq!(cui_agreement(&a, &b), None);
    }

    #[test]
    fn both_empty() {
        assert_eq!(span_jaccard(&[], &[]), 1.0);
        assert_eq!(cui_agreement(&[], &[]), None);
    }

    #[test]
    fn label_rules() {
        let jaundice_a = by("a", vec![ann("", "d", 0, 9, &["C0022346"])]);
        let jaundice_b = by("b", vec![ann("", "d", 0, 9, &["C0022346", "C0474426"])]);
        assert_eq!(cui_agreement(&jaundice_a, &jaundice_b), Some(1.0));

        let asthma = by("a", vec![ann("", "d", 0, 9, &["C0004096"])]);
        let exacerbation = by("b", vec![ann("", "d", 0, 9, &["C0349790"])]);
        assert_eq!(cui_agreement(&asthma, &exacerbation), Some(0.0));

        let mut less_a = ann("", "d", 0, 9, &[]);
        less_a.cui_less = true;
        let less_b = less_a.clone();
        assert_eq!(cui_agreement(&by("a", vec![less_a.clone()]), &by("b", vec![less_b])), Some(1.0));
        assert_eq!(cui_agreement(&by("a", vec![less_a]), &asthma), Some(0.0));
    }

    #[test]
    fn hand_enumerated_report() {
        let a = by("a", vec![ann("", "d", 0, 5, &["C0000001"]), ann("", "d", 10, 15, &["C0000002"])]);
        let b = by(
            "b",
            vec![ann("", "d", 0, 5, &["C0000001", "C0000003"]), ann("", "d", 20, 25, &["C0000004"])],
        );
        let corpus = Corpus::from_parts(vec![doc("d", &"x".repeat(30))], [a, b].concat()).unwrap();
        let r = agreement_report(&corpus, "a", "b").unwrap();
        assert_eq!(r.totals.span_jaccard, 1.0 / 3.0);
        assert_eq!(r.totals.concordant_spans, 1);
        assert_eq!(r.totals.cui_agreement, Some(1.0));
        assert_eq!(r.per_document.len(), 1);
        assert_eq!(r.per_document[0].counts, r.totals);
    }

    #[test]
    fn unknown_annotator() {
        let corpus = Corpus::from_parts(vec![doc("d", "xxxxx")], by("a", vec![ann("", "d", 0, 5, &["C0000001"])])).unwrap();
        assert_eq!(
            agreement_report(&corpus, "a", "zed").unwrap_err(),
            AgreementError::UnknownAnnotator("zed".into())
        );
    }

    #[test]
    fn proposed_annotations_are_ignored() {
        let a = by("a", vec![ann("", "d", 0, 5, &["C0000001"])]);
        let mut b = by("b", vec![ann("", "d", 0, 5, &["C0000001"])]);
        b[0].status = AnnotationStatus::Proposed;
        assert_eq!(span_jaccard(&a, &b), 0.0);
    }
}
