//! Seeded random instances.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, TimeZone, Utc};
use cuiwb_core::corpus::{Annotation, AnnotationStatus, Corpus, Document};
use cuiwb_core::eval_e2e::E2EPrediction;
use cuiwb_core::eval_norm::{GoldSpan, NormRun};
use cuiwb_core::{Cui, Label};
use rand::seq::SliceRandom;
use rand::Rng;

const WORDS: &[&str] = &[
    "severe", "asthma", "exacerbation", "pt", "chest", "pain", "jaundiced", "her", "his", "left", "breast",
    "history", "of", "the", "fever", "cough", "renal", "failure", "acute", "mild", "café", "naïve", "x-ray",
];

pub fn cui(n: usize) -> Cui {
    Cui::new(&format!("C{n:07}")).expect("generated CUI is valid")
}

pub fn cui_pool(size: usize) -> Vec<Cui> {
    (1..=size).map(|n| cui(1000 + n)).collect()
}

pub fn timestamp<R: Rng>(rng: &mut R) -> DateTime<Utc> {
    Utc.timestamp_opt(rng.gen_range(0..2_000_000_000), rng.gen_range(0..1_000_000_000))
        .single()
        .expect("in range")
}

/// Space-separated words, occasionally with non-ASCII characters and
/// irregular whitespace.
pub fn random_text<R: Rng>(rng: &mut R, words: usize) -> String {
    let mut out = String::new();
    for i in 0..words {
        if i > 0 {
            out.push_str(match rng.gen_range(0..20) {
                0 => "  ",
                1 => "\n",
                2 => ", ",
                _ => " ",
            });
        }
        out.push_str(WORDS.choose(rng).expect("non-empty"));
    }
    out
}

/// A random range inside a text of `len` characters; `len` must be > 0.
fn random_range<R: Rng>(rng: &mut R, len: usize) -> (usize, usize) {
    let start = rng.gen_range(0..len);
    let end = rng.gen_range(start + 1..=len.min(start + 30));
    (start, end)
}

fn random_labels<R: Rng>(rng: &mut R, pool: &[Cui]) -> (BTreeSet<Cui>, bool) {
    match rng.gen_range(0..10) {
        0 => (BTreeSet::new(), true),
        1 => (pool.choose_multiple(rng, 2).cloned().collect(), false),
        2 => (pool.choose_multiple(rng, 1).cloned().collect(), true),
        _ => (pool.choose_multiple(rng, 1).cloned().collect(), false),
    }
}

pub struct CorpusConfig {
    pub documents: usize,
    pub max_annotations: usize,
    pub annotators: &'static [&'static str],
    pub cui_pool: usize,
    /// Chance in percent that an annotation is not accepted.
    pub non_accepted_pct: u32,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            documents: 3,
            max_annotations: 40,
            annotators: &["a1", "a2"],
            cui_pool: 12,
            non_accepted_pct: 15,
        }
    }
}

/// A corpus of valid annotations: multi-CUI, CUI-less, nested and
/// non-accepted annotations all occur.
pub fn random_corpus<R: Rng>(rng: &mut R, cfg: &CorpusConfig) -> Corpus {
    let pool = cui_pool(cfg.cui_pool);
    let documents: Vec<Document> = (0..cfg.documents.max(1))
        .map(|i| Document {
            id: format!("doc{i}"),
            text: {
                let words = rng.gen_range(3..40);
                random_text(rng, words)
            },
            note_type: rng.gen_bool(0.5).then(|| "discharge".to_string()),
            section: rng.gen_bool(0.3).then(|| "hpi".to_string()),
        })
        .collect();
    let mut annotations: Vec<Annotation> = Vec::new();
    let n = rng.gen_range(0..=cfg.max_annotations);
    for i in 0..n {
        let doc = documents.choose(rng).expect("non-empty");
        let len = doc.text.chars().count();
        let (start, end) = match annotations.iter().filter(|a| a.doc_id == doc.id).last() {
            // Nest inside or reuse an earlier span now and then.
            Some(prev) if rng.gen_bool(0.3) && prev.end - prev.start > 2 => {
                let s = rng.gen_range(prev.start..prev.end - 1);
                (s, rng.gen_range(s + 1..prev.end))
            }
            Some(prev) if rng.gen_bool(0.2) => (prev.start, prev.end),
            _ => random_range(rng, len),
        };
        let (cuis, cui_less) = random_labels(rng, &pool);
        let status = if rng.gen_ratio(cfg.non_accepted_pct, 100) {
            if rng.gen_bool(0.5) {
                AnnotationStatus::Proposed
            } else {
                AnnotationStatus::Rejected
            }
        } else {
            AnnotationStatus::Accepted
        };
        annotations.push(Annotation {
            id: format!("ann{i}"),
            doc_id: doc.id.clone(),
            start,
            end,
            cuis,
            cui_less,
            annotator_id: cfg.annotators.choose(rng).expect("non-empty").to_string(),
            status,
            created_at: timestamp(rng),
        });
    }
    Corpus::from_parts(documents, annotations).expect("generated ids are unique")
}

/// Semantic types for every CUI in the pool; some CUIs carry two.
pub fn semtype_map<R: Rng>(rng: &mut R, pool: &[Cui]) -> BTreeMap<Cui, BTreeSet<String>> {
    const TYPES: &[&str] = &["T047", "T184", "T033", "T061", "T121"];
    pool.iter()
        .map(|c| {
            let k = rng.gen_range(1..=2);
            (c.clone(), TYPES.choose_multiple(rng, k).map(|t| t.to_string()).collect())
        })
        .collect()
}

pub struct NormInstance {
    pub train: Vec<GoldSpan>,
    pub test: Vec<GoldSpan>,
    pub runs: Vec<NormRun>,
    pub semtypes: BTreeMap<Cui, BTreeSet<String>>,
    pub semtype_min: usize,
}

fn gold_span<R: Rng>(rng: &mut R, id: String, pool: &[Cui], texts: &[String]) -> GoldSpan {
    let (gold_cuis, cui_less) = random_labels(rng, pool);
    let text = texts.choose(rng).expect("non-empty").clone();
    GoldSpan {
        span_id: id,
        doc_id: "d".into(),
        start: 0,
        end: text.chars().count().max(1),
        text,
        gold_cuis,
        cui_less,
    }
}

/// A normalization instance with up to `max_spans` test spans and up to
/// `max_systems` runs.
pub fn random_norm_instance<R: Rng>(rng: &mut R, max_spans: usize, max_systems: usize) -> NormInstance {
    let pool = cui_pool(rng.gen_range(3..160));
    let mut texts: Vec<String> = (0..rng.gen_range(2..25)).map(|_| {
            let words = rng.gen_range(1..4);
            random_text(rng, words)
        })
        .collect();
    // Case and possessive variants of the same surface text.
    let extra: Vec<String> = texts
        .iter()
        .take(3)
        .flat_map(|t| [t.to_uppercase(), format!("her {t}")])
        .collect();
    texts.extend(extra);

    let train: Vec<GoldSpan> = (0..rng.gen_range(1..300))
        .map(|i| gold_span(rng, format!("tr{i}"), &pool, &texts))
        .collect();
    let test: Vec<GoldSpan> = (0..rng.gen_range(0..=max_spans))
        .map(|i| {
            let mut s = gold_span(rng, format!("te{i}"), &pool, &texts);
            if rng.gen_bool(0.1) {
                s.text = random_text(rng, 2);
            }
            s
        })
        .collect();
    let runs = (0..rng.gen_range(1..=max_systems))
        .map(|r| {
            let skill = rng.gen_range(0.0..1.0);
            let mut predictions = BTreeMap::new();
            for span in &test {
                if rng.gen_bool(0.1) {
                    continue;
                }
                let label = if rng.gen_bool(skill) {
                    span.labels().into_iter().collect::<Vec<_>>().choose(rng).expect("labelled").clone()
                } else if rng.gen_bool(0.1) {
                    Label::CuiLess
                } else {
                    Label::Cui(pool.choose(rng).expect("non-empty").clone())
                };
                predictions.insert(span.span_id.clone(), label);
            }
            if rng.gen_bool(0.1) {
                predictions.insert("ghost".into(), Label::CuiLess);
            }
            NormRun {
                system_id: format!("sys{r}"),
                predictions,
            }
        })
        .collect();
    NormInstance {
        train,
        test,
        runs,
        semtypes: semtype_map(rng, &pool),
        semtype_min: rng.gen_range(0..8),
    }
}

pub struct E2EInstance {
    pub corpus: Corpus,
    pub predictions: Vec<E2EPrediction>,
    pub semtypes: BTreeMap<Cui, BTreeSet<String>>,
    pub semtype_min: usize,
}

/// Predictions derived from annotations (exact, shifted, or relabelled)
/// plus random noise, some in documents that do not exist.
pub fn random_predictions<R: Rng>(rng: &mut R, corpus: &Corpus, pool: &[Cui], n: usize) -> Vec<E2EPrediction> {
    let anns = corpus.annotations();
    let docs = corpus.documents();
    let mut out = Vec::new();
    for _ in 0..n {
        let label = if rng.gen_bool(0.1) {
            Label::CuiLess
        } else {
            Label::Cui(pool.choose(rng).expect("non-empty").clone())
        };
        let p = match (anns.choose(rng), rng.gen_range(0..10)) {
            (Some(a), 0..=4) => {
                let cui = match a.cuis.iter().collect::<Vec<_>>().choose(rng) {
                    Some(c) if rng.gen_bool(0.7) => Label::Cui((*c).clone()),
                    _ => label,
                };
                E2EPrediction {
                    doc_id: a.doc_id.clone(),
                    start: a.start,
                    end: a.end,
                    cui,
                }
            }
            (Some(a), 5..=6) => {
                let start = a.start.saturating_sub(rng.gen_range(0..3));
                E2EPrediction {
                    doc_id: a.doc_id.clone(),
                    start,
                    end: a.end + rng.gen_range(0..3),
                    cui: label,
                }
            }
            (_, 7) => E2EPrediction {
                doc_id: "elsewhere".into(),
                start: 0,
                end: 3,
                cui: label,
            },
            _ => {
                let doc = docs.choose(rng).expect("non-empty");
                let (start, end) = random_range(rng, doc.text.chars().count());
                E2EPrediction {
                    doc_id: doc.id.clone(),
                    start,
                    end,
                    cui: label,
                }
            }
        };
        out.push(p);
    }
    out
}

/// A two-annotator corpus with at most `max_spans` annotations and
/// predictions against it.
pub fn random_e2e_instance<R: Rng>(rng: &mut R, max_spans: usize) -> E2EInstance {
    let cfg = CorpusConfig {
        documents: rng.gen_range(1..5),
        max_annotations: max_spans,
        cui_pool: rng.gen_range(2..15),
        ..CorpusConfig::default()
    };
    let corpus = random_corpus(rng, &cfg);
    let pool = cui_pool(cfg.cui_pool);
    let n = rng.gen_range(0..=max_spans);
    let predictions = random_predictions(rng, &corpus, &pool, n);
    E2EInstance {
        corpus,
        predictions,
        semtypes: semtype_map(rng, &pool),
        semtype_min: rng.gen_range(0..6),
    }
}

/// Gold spans for lenient scoring, one per accepted annotation with a
/// distinct range.
pub fn lenient_gold(corpus: &Corpus) -> Vec<GoldSpan> {
    let mut seen = BTreeSet::new();
    corpus
        .annotations()
        .iter()
        .filter(|a| a.status == AnnotationStatus::Accepted)
        .filter(|a| seen.insert((a.doc_id.clone(), a.start, a.end)))
        .map(|a| GoldSpan {
            span_id: a.id.clone(),
            doc_id: a.doc_id.clone(),
            start: a.start,
            end: a.end,
            text: String::new(),
            gold_cuis: a.cuis.clone(),
            cui_less: a.cui_less,
        })
        .collect()
}

/// A vocabulary TSV with `terms` rows over `terms / 3` concepts, built from a
/// pseudo-word lexicon so that stems are shared across many concepts.
pub fn synthetic_vocab<R: Rng>(rng: &mut R, terms: usize) -> String {
    let syllables = ["ab", "cor", "dex", "fen", "gal", "hep", "ist", "lor", "mab", "nor", "ox", "pril", "sul", "tin", "vas", "zol"];
    let lexicon: Vec<String> = (0..2000)
        .map(|_| {
            let k = rng.gen_range(2..4);
            (0..k).map(|_| *syllables.choose(rng).expect("non-empty")).collect()
        })
        .collect();
    let concepts = (terms / 3).max(1);
    let mut out = String::new();
    for i in 0..terms {
        let c = i % concepts;
        let words = rng.gen_range(1..5);
        let term: Vec<&str> = (0..words).map(|_| lexicon.choose(rng).expect("non-empty").as_str()).collect();
        out.push_str(&format!(
            "C{:07}\t{}\t{}\tT{:03}\tSYNTH\n",
            2_000_000 + c,
            term.join(" "),
            u8::from(i < concepts),
            c % 40
        ));
    }
    out
}
