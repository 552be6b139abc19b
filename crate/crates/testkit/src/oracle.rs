//! Reference scorers. Each recomputes a report from its definition without
//! sharing code paths with the library beyond the plain data types.

use std::collections::{BTreeMap, BTreeSet};

use cuiwb_core::corpus::{Annotation, AnnotationStatus};
use cuiwb_core::eval_e2e::{CompoundAnalysis, E2EMode, E2EPrediction, E2EReport, E2ERow, MatchMode};
use cuiwb_core::eval_norm::{GoldSpan, NormEvalReport, NormRow, NormRun, SystemScore, UnknownPrediction};
use cuiwb_core::{Cui, Label};

const POSSESSIVES: [&str; 7] = ["his", "her", "their", "my", "your", "our", "its"];

pub fn preprocess(text: &str) -> String {
    let words: Vec<String> = text.split_whitespace().map(|w| w.to_lowercase()).collect();
    if words.len() >= 2 && POSSESSIVES.contains(&words[0].as_str()) {
        words[1..].join(" ")
    } else {
        words.join(" ")
    }
}

fn labels(span: &GoldSpan) -> Vec<Label> {
    let mut out: Vec<Label> = span.gold_cuis.iter().cloned().map(Label::Cui).collect();
    if span.cui_less {
        out.push(Label::CuiLess);
    }
    out
}

fn correct(span: &GoldSpan, run: &NormRun) -> bool {
    match run.predictions.get(&span.span_id) {
        None => false,
        Some(p) => labels(span).contains(p),
    }
}

fn frac(n: usize, d: usize) -> Option<f64> {
    if d == 0 {
        None
    } else {
        Some(n as f64 / d as f64)
    }
}

fn norm_row(name: &str, members: &[&GoldSpan], runs: &[NormRun]) -> NormRow {
    let n = members.len();
    let mut systems = Vec::new();
    let mut best = 0;
    let mut total = 0;
    for run in runs {
        let mut c = 0;
        for s in members {
            if correct(s, run) {
                c += 1;
            }
        }
        best = best.max(c);
        total += c;
        systems.push(SystemScore {
            system_id: run.system_id.clone(),
            correct: c,
            accuracy: frac(c, n),
        });
    }
    let mut pooled = 0;
    for s in members {
        if runs.iter().any(|r| correct(s, r)) {
            pooled += 1;
        }
    }
    NormRow {
        name: name.to_string(),
        example_count: n,
        max_acc: frac(best, n),
        avg_acc: frac(total, n * runs.len()),
        pooled_acc: frac(pooled, n),
        pooled_correct: pooled,
        systems,
    }
}

/// Subset membership of a test span, as the list of subset labels.
pub fn subset_flags(train: &[GoldSpan], span: &GoldSpan, direct: Option<&dyn Fn(&str) -> bool>) -> Vec<&'static str> {
    let text = preprocess(&span.text);
    let gold = labels(span);
    let mut flags = vec!["All"];

    // Top 100: rank CUIs by number of training spans carrying them.
    let mut freq: Vec<(Cui, usize)> = Vec::new();
    for t in train {
        for c in &t.gold_cuis {
            match freq.iter_mut().find(|(x, _)| x == c) {
                Some(e) => e.1 += 1,
                None => freq.push((c.clone(), 1)),
            }
        }
    }
    freq.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let top: Vec<&Cui> = freq.iter().take(100).map(|(c, _)| c).collect();
    if span.gold_cuis.iter().any(|c| top.contains(&c)) {
        flags.push("Top 100 CUI");
    }

    if text.split(' ').filter(|w| !w.is_empty()).count() >= 2 {
        flags.push("Multi-word");
    }

    let same_text: Vec<&GoldSpan> = train.iter().filter(|t| preprocess(&t.text) == text).collect();
    if same_text.is_empty() {
        flags.push("Unseen Text");
    }

    let seen_label = train.iter().any(|t| labels(t).iter().any(|l| gold.contains(l)));
    if !seen_label {
        flags.push("Unseen CUI");
    }

    if let Some(direct) = direct {
        if !direct(&text) {
            flags.push("Not Direct Match");
        }
    }

    // Unpopular: some other label was used for this text strictly more
    // often than every gold label.
    let count = |l: &Label| same_text.iter().filter(|t| labels(t).contains(l)).count();
    let best_gold = gold.iter().map(count).max().unwrap_or(0);
    let mut unpopular = false;
    for t in &same_text {
        for l in labels(t) {
            if !gold.contains(&l) && count(&l) > best_gold {
                unpopular = true;
            }
        }
    }
    if unpopular {
        flags.push("Unpopular CUI");
    }
    flags
}

const SUBSET_ORDER: [&str; 7] = [
    "All",
    "Top 100 CUI",
    "Multi-word",
    "Unseen Text",
    "Unseen CUI",
    "Not Direct Match",
    "Unpopular CUI",
];

fn semtype_rows<'a>(
    items: impl Iterator<Item = &'a BTreeSet<Cui>> + Clone,
    semtypes: &BTreeMap<Cui, BTreeSet<String>>,
    min: usize,
) -> Vec<(String, Vec<usize>)> {
    let mut all_types: BTreeSet<&String> = BTreeSet::new();
    for cuis in items.clone() {
        for c in cuis {
            if let Some(ts) = semtypes.get(c) {
                all_types.extend(ts);
            }
        }
    }
    let mut rows = Vec::new();
    for t in all_types {
        let members: Vec<usize> = items
            .clone()
            .enumerate()
            .filter(|(_, cuis)| cuis.iter().any(|c| semtypes.get(c).is_some_and(|ts| ts.contains(t))))
            .map(|(i, _)| i)
            .collect();
        if members.len() >= min {
            rows.push((t.clone(), members));
        }
    }
    rows.sort_by(|a, b| b.1.len().cmp(&a.1.len()).then(a.0.cmp(&b.0)));
    rows
}

pub fn norm_report(
    train: &[GoldSpan],
    test: &[GoldSpan],
    runs: &[NormRun],
    direct: Option<&dyn Fn(&str) -> bool>,
    semtypes: &BTreeMap<Cui, BTreeSet<String>>,
    semtype_min: usize,
) -> NormEvalReport {
    let flags: Vec<Vec<&str>> = test.iter().map(|s| subset_flags(train, s, direct)).collect();
    let mut subsets = Vec::new();
    for name in SUBSET_ORDER {
        if name == "Not Direct Match" && direct.is_none() {
            continue;
        }
        let members: Vec<&GoldSpan> = test
            .iter()
            .zip(&flags)
            .filter(|(_, f)| f.contains(&name))
            .map(|(s, _)| s)
            .collect();
        subsets.push(norm_row(name, &members, runs));
    }
    let semantic_types = semtype_rows(test.iter().map(|s| &s.gold_cuis), semtypes, semtype_min)
        .into_iter()
        .map(|(t, idx)| {
            let members: Vec<&GoldSpan> = idx.into_iter().map(|i| &test[i]).collect();
            norm_row(&t, &members, runs)
        })
        .collect();
    let mut unknown = Vec::new();
    for run in runs {
        for id in run.predictions.keys() {
            if !test.iter().any(|s| &s.span_id == id) {
                unknown.push(UnknownPrediction {
                    system_id: run.system_id.clone(),
                    span_id: id.clone(),
                });
            }
        }
    }
    NormEvalReport {
        systems: runs.iter().map(|r| r.system_id.clone()).collect(),
        subsets,
        semtype_min_count: semtype_min,
        semantic_types,
        unknown_span_ids: unknown,
    }
}

fn overlap(a: (usize, usize), b: (usize, usize)) -> bool {
    // Shared positions, checked one by one.
    (a.0..a.1).any(|i| b.0 <= i && i < b.1)
}

fn strictly_inside(outer: (usize, usize), inner: (usize, usize)) -> bool {
    outer != inner && outer.0 <= inner.0 && inner.1 <= outer.1
}

fn e2e_row(name: &str, n: usize, spans: usize, cuis: usize) -> E2ERow {
    let pct = |k: usize| if n == 0 { None } else { Some(100.0 * k as f64 / n as f64) };
    E2ERow {
        name: name.to_string(),
        gold_count: n,
        spans_correct: spans,
        cuis_correct: cuis,
        spans_correct_pct: pct(spans),
        cuis_correct_pct: pct(cuis),
        cui_precision: frac(cuis, spans),
    }
}

fn unknown_docs(known: &[&str], preds: &[E2EPrediction]) -> Vec<String> {
    let mut out: Vec<String> = preds
        .iter()
        .filter(|p| !known.contains(&p.doc_id.as_str()))
        .map(|p| p.doc_id.clone())
        .collect();
    out.sort();
    out.dedup();
    out
}

/// Lenient scoring: per gold span (recognized, correct).
pub fn lenient_outcome(span: &GoldSpan, preds: &[E2EPrediction]) -> (bool, bool) {
    let range = (span.start, span.end);
    let same_doc: Vec<&E2EPrediction> = preds.iter().filter(|p| p.doc_id == span.doc_id).collect();
    let overlapping: Vec<&&E2EPrediction> = same_doc.iter().filter(|p| overlap(range, (p.start, p.end))).collect();
    let cui_hit = overlapping
        .iter()
        .any(|p| matches!(&p.cui, Label::Cui(c) if span.gold_cuis.contains(c)));
    let cui_less_ok = span.cui_less
        && !same_doc
            .iter()
            .any(|p| (p.start, p.end) == range && p.cui != Label::CuiLess);
    (!overlapping.is_empty() || cui_less_ok, cui_hit || cui_less_ok)
}

pub fn lenient_report(
    gold: &[GoldSpan],
    preds: &[E2EPrediction],
    semtypes: &BTreeMap<Cui, BTreeSet<String>>,
    semtype_min: usize,
) -> E2EReport {
    let outcomes: Vec<(bool, bool)> = gold.iter().map(|g| lenient_outcome(g, preds)).collect();
    let count = |idx: &[usize], pick: fn(&(bool, bool)) -> bool| idx.iter().filter(|&&i| pick(&outcomes[i])).count();
    let all: Vec<usize> = (0..gold.len()).collect();
    let semantic_types = semtype_rows(gold.iter().map(|g| &g.gold_cuis), semtypes, semtype_min)
        .into_iter()
        .map(|(t, idx)| e2e_row(&t, idx.len(), count(&idx, |o| o.0), count(&idx, |o| o.1)))
        .collect();
    let known: Vec<&str> = gold.iter().map(|g| g.doc_id.as_str()).collect();
    E2EReport {
        mode: E2EMode::Lenient,
        match_mode: None,
        overall: e2e_row("All", gold.len(), count(&all, |o| o.0), count(&all, |o| o.1)),
        semtype_min_count: semtype_min,
        semantic_types,
        compound: None,
        unknown_documents: unknown_docs(&known, preds),
    }
}

/// Merged gold: (doc, start, end, cuis) for every distinct accepted range
/// whose pooled CUI set is non-empty, sorted.
pub fn merged_gold(annotations: &[Annotation]) -> Vec<(String, usize, usize, BTreeSet<Cui>)> {
    let mut out: Vec<(String, usize, usize, BTreeSet<Cui>)> = Vec::new();
    for a in annotations {
        if a.status != AnnotationStatus::Accepted {
            continue;
        }
        match out
            .iter_mut()
            .find(|(d, s, e, _)| *d == a.doc_id && *s == a.start && *e == a.end)
        {
            Some(entry) => entry.3.extend(a.cuis.iter().cloned()),
            None => out.push((a.doc_id.clone(), a.start, a.end, a.cuis.clone())),
        }
    }
    out.retain(|g| !g.3.is_empty());
    out.sort();
    out
}

pub fn framework_report(
    annotations: &[Annotation],
    preds: &[E2EPrediction],
    mode: MatchMode,
    semtypes: &BTreeMap<Cui, BTreeSet<String>>,
    semtype_min: usize,
) -> E2EReport {
    let gold = merged_gold(annotations);
    let matches = |g: &(String, usize, usize, BTreeSet<Cui>), p: &E2EPrediction| {
        p.doc_id == g.0
            && match mode {
                MatchMode::Exact => (p.start, p.end) == (g.1, g.2),
                MatchMode::Overlap => overlap((g.1, g.2), (p.start, p.end)),
            }
    };
    let credit: Vec<(bool, bool)> = gold
        .iter()
        .map(|g| {
            let recognized = preds.iter().any(|p| matches(g, p));
            let cui_ok = preds
                .iter()
                .any(|p| matches(g, p) && matches!(&p.cui, Label::Cui(c) if g.3.contains(c)));
            (recognized, cui_ok)
        })
        .collect();
    let count = |idx: &[usize], pick: fn(&(bool, bool)) -> bool| idx.iter().filter(|&&i| pick(&credit[i])).count();
    let all: Vec<usize> = (0..gold.len()).collect();
    let semantic_types = semtype_rows(gold.iter().map(|g| &g.3), semtypes, semtype_min)
        .into_iter()
        .map(|(t, idx)| e2e_row(&t, idx.len(), count(&idx, |o| o.0), count(&idx, |o| o.1)))
        .collect();

    let mut compound = CompoundAnalysis::default();
    for (i, g) in gold.iter().enumerate() {
        let same_doc = |j: &usize| gold[*j].0 == g.0;
        let inside: Vec<usize> = (0..gold.len())
            .filter(same_doc)
            .filter(|&j| strictly_inside((g.1, g.2), (gold[j].1, gold[j].2)))
            .collect();
        let contained = (0..gold.len())
            .filter(same_doc)
            .any(|j| strictly_inside((gold[j].1, gold[j].2), (g.1, g.2)));
        if inside.is_empty() || contained {
            continue;
        }
        compound.maximal_compound_count += 1;
        if credit[i].0 {
            compound.recovered += 1;
        } else {
            compound.missed += 1;
            if inside.iter().any(|&j| credit[j].1) {
                compound.missed_with_subspan_credit += 1;
            }
        }
    }

    let known: Vec<&str> = gold.iter().map(|g| g.0.as_str()).collect();
    E2EReport {
        mode: E2EMode::Framework,
        match_mode: Some(mode),
        overall: e2e_row("All", gold.len(), count(&all, |o| o.0), count(&all, |o| o.1)),
        semtype_min_count: semtype_min,
        semantic_types,
        compound: Some(compound),
        unknown_documents: unknown_docs(&known, preds),
    }
}

/// Span Jaccard from the definition: distinct (doc, start, end) triples of
/// accepted annotations.
pub fn span_jaccard(a: &[Annotation], b: &[Annotation]) -> f64 {
    let keys = |xs: &[Annotation]| -> BTreeSet<(String, usize, usize)> {
        xs.iter()
            .filter(|x| x.status == AnnotationStatus::Accepted)
            .map(|x| (x.doc_id.clone(), x.start, x.end))
            .collect()
    };
    let (ka, kb) = (keys(a), keys(b));
    let union = ka.union(&kb).count();
    if union == 0 {
        1.0
    } else {
        ka.intersection(&kb).count() as f64 / union as f64
    }
}
