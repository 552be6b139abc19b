//! Acceptance suite. Runs without the test harness so that one PASS/FAIL
//! line per criterion is always printed; exits non-zero if any fails.

mod common;

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use chrono::{TimeZone, Utc};
use cuiwb_core::agreement::{agreement_report, span_jaccard};
use cuiwb_core::corpus::{export_corpus, import_corpus, Annotation, AnnotationStatus, Corpus, Document};
use cuiwb_core::eval_e2e::{compound_analysis, framework_eval_merged, lenient_report, merge_gold, E2EPrediction, MatchMode};
use cuiwb_core::eval_norm::{assign_subsets, evaluate_norm, Subset};
use cuiwb_core::suggestion::{index_candidates, suggest};
use cuiwb_core::text::stem_tokens;
use cuiwb_core::vocabulary::{build_index, parse_vocab_file, SemanticTypeSource, VocabularyIndex};
use cuiwb_core::{Cui, Label};
use cuiwb_testkit::{gen, oracle};
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use serde_json::{json, Value};

use common::{fixture, Server};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

fn toy_vocab() -> String {
    std::fs::read_to_string(fixture("toy_vocab.tsv")).unwrap()
}

fn index_of(tsv: &str) -> VocabularyIndex {
    build_index(parse_vocab_file(tsv.as_bytes()).unwrap()).unwrap()
}

fn ann(id: String, doc: &str, start: usize, end: usize, cui: usize, who: &str, status: AnnotationStatus) -> Annotation {
    Annotation {
        id,
        doc_id: doc.to_string(),
        start,
        end,
        cuis: [gen::cui(cui)].into(),
        cui_less: false,
        annotator_id: who.to_string(),
        status,
        created_at: Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap(),
    }
}

/// |A| = 1288, |B| = 1435, |A ∪ B| = 1571, so 1152 shared spans. Rejected
/// annotations and second labels on a span must not change the counts.
fn jaccard_reproduction() -> Verdict {
    let started = Instant::now();
    let docs: Vec<Document> = (0..16)
        .map(|i| Document {
            id: format!("d{i}"),
            text: "lorem ipsum ".repeat(90),
            note_type: None,
            section: None,
        })
        .collect();
    let place = |i: usize| (format!("d{}", i / 100), (i % 100) * 10, (i % 100) * 10 + 5);
    let mut anns = Vec::new();
    for i in 0..1571 {
        let (doc, s, e) = place(i);
        let (in_a, in_b) = (i < 1288, !(1152..1288).contains(&i));
        let status = if in_a { AnnotationStatus::Accepted } else { AnnotationStatus::Rejected };
        anns.push(ann(format!("a-{i}"), &doc, s, e, i % 40, "A", status));
        if in_b {
            anns.push(ann(format!("b-{i}"), &doc, s, e, i % 40, "B", AnnotationStatus::Accepted));
            if i % 7 == 0 {
                anns.push(ann(format!("b-extra-{i}"), &doc, s, e, 41, "B", AnnotationStatus::Accepted));
            }
        }
    }
    let corpus = Corpus::from_parts(docs, anns).unwrap();
    let report = agreement_report(&corpus, "A", "B").unwrap();
    let t = &report.totals;
    let (a, b): (Vec<_>, Vec<_>) = corpus.annotations().iter().cloned().partition(|x| x.annotator_id == "A");
    let reference = oracle::span_jaccard(&a, &b);
    let elapsed = started.elapsed();
    let counts_ok = (t.spans_a, t.spans_b, t.spans_union) == (1288, 1435, 1571);
    let pass = counts_ok
        && (t.span_jaccard - 0.733).abs() <= 0.001
        && t.span_jaccard == reference
        && span_jaccard(&a, &b) == reference
        && elapsed < Duration::from_secs(1);
    verdict(
        pass,
        format!(
            "|A|={} |B|={} |A∪B|={} jaccard={:.4} (reference {:.4}), {} ms",
            t.spans_a,
            t.spans_b,
            t.spans_union,
            t.span_jaccard,
            reference,
            elapsed.as_millis()
        ),
    )
}

/// 174 documents, each with one compound span over two tagged subspans.
/// The first 74 compounds are predicted exactly; of the remaining 100, 54
/// have a subspan predicted with its CUI, 23 a subspan predicted with a
/// wrong CUI, and 23 nothing.
fn compound_counts() -> Verdict {
    let started = Instant::now();
    let text = "severe asthma exacerbation noted today";
    let mut docs = Vec::new();
    let mut anns = Vec::new();
    let mut preds = Vec::new();
    let pred = |doc: &str, s: usize, e: usize, cui: usize| E2EPrediction {
        doc_id: doc.to_string(),
        start: s,
        end: e,
        cui: Label::Cui(gen::cui(cui)),
    };
    for i in 0..174 {
        let doc = format!("n{i:03}");
        docs.push(Document {
            id: doc.clone(),
            text: text.to_string(),
            note_type: None,
            section: None,
        });
        let who = if i % 2 == 0 { "a1" } else { "a2" };
        anns.push(ann(format!("{doc}-c"), &doc, 0, 26, 1, who, AnnotationStatus::Accepted));
        anns.push(ann(format!("{doc}-s1"), &doc, 7, 13, 2, "a1", AnnotationStatus::Accepted));
        anns.push(ann(format!("{doc}-s2"), &doc, 14, 26, 3, "a2", AnnotationStatus::Accepted));
        // An unrelated span after the compound.
        anns.push(ann(format!("{doc}-x"), &doc, 27, 32, 4, "a1", AnnotationStatus::Accepted));
        match i {
            0..74 => preds.push(pred(&doc, 0, 26, if i % 3 == 0 { 9 } else { 1 })),
            74..128 => preds.push(pred(&doc, 7, 13, 2)),
            128..151 => preds.push(pred(&doc, 14, 26, 8)),
            _ => {}
        }
        if i % 5 == 0 {
            preds.push(pred(&doc, 27, 32, 4));
        }
    }
    let corpus = Corpus::from_parts(docs, anns).unwrap();
    let gold = merge_gold(corpus.annotations());
    let c = compound_analysis(&gold, &preds, MatchMode::Exact);
    let full = framework_eval_merged(&gold, &preds, MatchMode::Exact, None, 0).compound.unwrap();
    let reference = oracle::framework_report(corpus.annotations(), &preds, MatchMode::Exact, &Default::default(), 0)
        .compound
        .unwrap();
    let elapsed = started.elapsed();
    let got = (c.maximal_compound_count, c.recovered, c.missed, c.missed_with_subspan_credit);
    let pass = got == (174, 74, 100, 54) && c == full && c == reference && elapsed < Duration::from_secs(1);
    verdict(pass, format!("(maximal, recovered, missed, credited) = {got:?}, {} ms", elapsed.as_millis()))
}

/// Evaluators against the brute-force reference scorers on 50 random
/// corpora with up to 200 spans and up to 5 systems.
fn oracle_equivalence() -> Verdict {
    let started = Instant::now();
    let vocab = index_of(&toy_vocab());
    let direct = |t: &str| !vocab.lookup(t).is_empty();
    let mut mismatches = Vec::new();
    for seed in 0..50u64 {
        let mut r = rng(1000 + seed);
        let inst = gen::random_norm_instance(&mut r, 200, 5);
        let with_vocab = seed % 2 == 0;
        let assignment = assign_subsets(&inst.train, &inst.test, with_vocab.then_some(&vocab)).unwrap();
        let got = evaluate_norm(&inst.test, &inst.runs, &assignment, Some(&inst.semtypes as &dyn SemanticTypeSource), inst.semtype_min).unwrap();
        let expected = oracle::norm_report(
            &inst.train,
            &inst.test,
            &inst.runs,
            with_vocab.then_some(&direct as &dyn Fn(&str) -> bool),
            &inst.semtypes,
            inst.semtype_min,
        );
        if got != expected {
            mismatches.push(format!("norm seed {seed}"));
        }

        let inst = gen::random_e2e_instance(&mut r, 200);
        let gold = merge_gold(inst.corpus.annotations());
        for mode in [MatchMode::Exact, MatchMode::Overlap] {
            let got = framework_eval_merged(&gold, &inst.predictions, mode, Some(&inst.semtypes), inst.semtype_min);
            let expected = oracle::framework_report(inst.corpus.annotations(), &inst.predictions, mode, &inst.semtypes, inst.semtype_min);
            if got != expected {
                mismatches.push(format!("framework {mode:?} seed {seed}"));
            }
        }
        let lenient = gen::lenient_gold(&inst.corpus);
        let got = lenient_report(&lenient, &inst.predictions, Some(&inst.semtypes), inst.semtype_min);
        if got != oracle::lenient_report(&lenient, &inst.predictions, &inst.semtypes, inst.semtype_min) {
            mismatches.push(format!("lenient seed {seed}"));
        }
    }
    let elapsed = started.elapsed();
    let pass = mismatches.is_empty() && elapsed < Duration::from_secs(30);
    verdict(
        pass,
        format!("50 corpora x 4 reports, {} mismatches {:?}, {:.1} s", mismatches.len(), mismatches, elapsed.as_secs_f64()),
    )
}

/// pooled >= max >= avg, cuis% <= spans%, Unpopular ∩ UnseenText = ∅.
fn metric_order() -> Verdict {
    let mut violations = 0usize;
    let mut rows = 0usize;
    const INSTANCES: u64 = 1000;
    for seed in 0..INSTANCES {
        let mut r = rng(50_000 + seed);
        let inst = gen::random_norm_instance(&mut r, 60, 5);
        let assignment = assign_subsets(&inst.train, &inst.test, None).unwrap();
        let report = evaluate_norm(&inst.test, &inst.runs, &assignment, Some(&inst.semtypes as &dyn SemanticTypeSource), inst.semtype_min).unwrap();
        for row in report.subsets.iter().chain(&report.semantic_types) {
            rows += 1;
            let ok = match (row.pooled_acc, row.max_acc, row.avg_acc) {
                (Some(p), Some(m), Some(a)) => p >= m && m >= a,
                (None, None, None) => row.example_count == 0,
                _ => false,
            };
            violations += usize::from(!ok);
        }
        violations += inst
            .test
            .iter()
            .filter(|s| assignment.contains(&s.span_id, Subset::UnpopularCui) && assignment.contains(&s.span_id, Subset::UnseenText))
            .count();

        let e2e = gen::random_e2e_instance(&mut r, 60);
        let gold = merge_gold(e2e.corpus.annotations());
        for mode in [MatchMode::Exact, MatchMode::Overlap] {
            let rep = framework_eval_merged(&gold, &e2e.predictions, mode, Some(&e2e.semtypes), 0);
            let lenient = lenient_report(&gen::lenient_gold(&e2e.corpus), &e2e.predictions, Some(&e2e.semtypes), 0);
            for row in [&rep, &lenient].into_iter().flat_map(|r| std::iter::once(&r.overall).chain(&r.semantic_types)) {
                rows += 1;
                let ok = match (row.cuis_correct_pct, row.spans_correct_pct) {
                    (Some(c), Some(s)) => c <= s,
                    (None, None) => row.gold_count == 0,
                    _ => false,
                };
                violations += usize::from(!ok || row.cuis_correct > row.spans_correct);
            }
        }
    }
    verdict(violations == 0, format!("{INSTANCES} instances, {rows} rows, {violations} violations"))
}

fn suggestion_determinism_recall_latency() -> Verdict {
    let tsv = toy_vocab();
    let queries = ["pt", "asthma", "severe asthma exacerbation", "chest pain", "jaundiced", "yellow", "tibial pulse", "the of", ""];
    let rankings = |idx: &VocabularyIndex| -> Vec<u8> {
        let all: Vec<_> = queries.iter().map(|q| suggest(idx, q, 10)).collect();
        serde_json::to_vec(&all).unwrap()
    };
    let first = rankings(&index_of(&tsv));
    let identical = (0..100).all(|_| rankings(&index_of(&tsv)) == first);

    // Recall by exhaustive scoring over every concept.
    let idx = index_of(&tsv);
    let mut recall_misses = 0;
    for q in queries.iter().chain(&["pain in the chest", "severe", "therapy"]) {
        let stems: BTreeSet<String> = stem_tokens(q).into_iter().collect();
        let expected: BTreeSet<Cui> = idx
            .concept_set()
            .iter()
            .filter(|c| c.synonyms.iter().flat_map(|s| stem_tokens(s)).any(|s| stems.contains(&s)))
            .map(|c| c.cui.clone())
            .collect();
        let got: BTreeSet<Cui> = index_candidates(&idx, q).into_iter().map(|s| s.cui).collect();
        recall_misses += expected.symmetric_difference(&got).count();
    }

    let mut r = rng(7);
    let big = gen::synthetic_vocab(&mut r, 50_000);
    let started = Instant::now();
    let big_idx = index_of(&big);
    let build = started.elapsed();
    let terms: Vec<&str> = big.lines().map(|l| l.split('\t').nth(1).unwrap()).collect();
    let mut times: Vec<Duration> = (0..300)
        .map(|i| {
            let words: Vec<&str> = terms.choose(&mut r).unwrap().split(' ').collect();
            let take = r.gen_range(1..=words.len());
            let mut q = words[..take].join(" ");
            if i % 4 == 0 {
                q.push_str(" unknownword");
            }
            let t = Instant::now();
            let res = suggest(&big_idx, &q, 10);
            let dt = t.elapsed();
            assert!(!(res.direct.is_empty() && res.partial.is_empty()), "query {q:?} found nothing");
            dt
        })
        .collect();
    times.sort();
    let median = times[times.len() / 2];
    let pass = identical && recall_misses == 0 && median < Duration::from_millis(5) && build < Duration::from_secs(5);
    verdict(
        pass,
        format!(
            "100 rebuilds identical: {identical}; recall misses {recall_misses}; 50k terms: build {} ms, median query {:.3} ms",
            build.as_millis(),
            median.as_secs_f64() * 1e3
        ),
    )
}

fn corpus_round_trip() -> Verdict {
    let mut failures = 0;
    let (mut multi, mut cui_less, mut nested, mut proposed) = (0, 0, 0, 0);
    for seed in 0..1000u64 {
        let mut r = rng(90_000 + seed);
        let cfg = gen::CorpusConfig {
            documents: r.gen_range(1..6),
            max_annotations: r.gen_range(0..80),
            ..gen::CorpusConfig::default()
        };
        let corpus = gen::random_corpus(&mut r, &cfg);
        let bytes = export_corpus(&corpus);
        match import_corpus(&bytes) {
            Ok(back) if back == corpus && export_corpus(&back) == bytes => {}
            _ => failures += 1,
        }
        let anns = corpus.annotations();
        multi += anns.iter().filter(|a| a.cuis.len() > 1).count();
        cui_less += anns.iter().filter(|a| a.cui_less).count();
        proposed += anns.iter().filter(|a| a.status == AnnotationStatus::Proposed).count();
        nested += anns
            .iter()
            .filter(|a| anns.iter().any(|b| b.doc_id == a.doc_id && cuiwb_core::corpus::strictly_contains(a.range(), b.range())))
            .count();
    }
    let covered = multi > 0 && cui_less > 0 && nested > 0 && proposed > 0;
    verdict(
        failures == 0 && covered,
        format!("1000 corpora, {failures} failures; multi-CUI {multi}, CUI-less {cui_less}, nested {nested}, proposed {proposed}"),
    )
}

/// Writers hammer a live server which is SIGKILLed at a random moment;
/// after restart every acknowledged write must be present and every store
/// file must parse.
fn crash_after_ack() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let vocab = fixture("toy_vocab.tsv");
    let text = "Pt with severe asthma exacerbation. ".repeat(60);
    let acked: Arc<Mutex<Vec<(String, String)>>> = Arc::default();
    let mut r = rng(3);
    let mut problems = Vec::new();
    const ROUNDS: usize = 6;
    for round in 0..ROUNDS {
        let server = Server::start(&vocab, dir.path());
        if round == 0 {
            for d in ["c0", "c1", "c2"] {
                let (status, _) = server.post("/api/documents", &json!({"id": d, "text": text}));
                assert_eq!(status, 201);
                acked.lock().unwrap().push((d.to_string(), String::new()));
            }
        }
        let addr = server.addr;
        let writers: Vec<_> = (0..6)
            .map(|w| {
                let acked = Arc::clone(&acked);
                thread::spawn(move || {
                    for i in 0.. {
                        let doc = format!("c{}", w % 3);
                        let id = format!("r{round}-w{w}-{i}");
                        let start = (i * 7 + w) % 2000;
                        let body = json!({"id": id, "start": start, "end": start + 5, "cuis": ["C0004096"], "annotator_id": format!("w{w}-r{round}")});
                        let (status, _) = common::http(addr, "POST", &format!("/api/documents/{doc}/annotations"), Some(&body));
                        match status {
                            201 => acked.lock().unwrap().push((doc, id)),
                            0 => break,
                            other => panic!("unexpected status {other}"),
                        }
                    }
                })
            })
            .collect();
        thread::sleep(Duration::from_millis(r.gen_range(30..250)));
        server.kill();
        for w in writers {
            if w.join().is_err() {
                problems.push(format!("round {round}: writer failed"));
            }
        }

        // Raw files: every document and annotation file is complete JSON.
        for sub in ["docs", "annotations"] {
            for entry in std::fs::read_dir(dir.path().join(sub)).unwrap() {
                let path = entry.unwrap().path();
                if path.extension().is_some_and(|e| e == "json")
                    && serde_json::from_slice::<Value>(&std::fs::read(&path).unwrap()).is_err()
                {
                    problems.push(format!("round {round}: torn file {}", path.display()));
                }
            }
        }

        let server = Server::start(&vocab, dir.path());
        let mut present = BTreeSet::new();
        for d in ["c0", "c1", "c2"] {
            let (status, body) = server.get(&format!("/api/documents/{d}/annotations"));
            if status != 200 {
                problems.push(format!("round {round}: document {d} missing after restart"));
                continue;
            }
            for a in body.as_array().unwrap() {
                present.insert((d.to_string(), a["id"].as_str().unwrap().to_string()));
            }
        }
        let missing = acked
            .lock()
            .unwrap()
            .iter()
            .filter(|(_, id)| !id.is_empty())
            .filter(|k| !present.contains(*k))
            .count();
        if missing > 0 {
            problems.push(format!("round {round}: {missing} acknowledged annotations lost"));
        }
        server.kill();
    }
    let total = acked.lock().unwrap().len();
    let leftovers = std::fs::read_dir(dir.path().join("annotations"))
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().to_string_lossy().ends_with(".tmp"))
        .count();
    if leftovers > 0 {
        problems.push(format!("{leftovers} temporaries survived a restart"));
    }
    verdict(
        problems.is_empty() && total > 3 * ROUNDS,
        format!("{ROUNDS} kill/restart rounds, {total} acknowledged writes, problems: {problems:?}"),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 7] = [
        ("Jaccard reproduction", jaccard_reproduction),
        ("Compound-count arithmetic", compound_counts),
        ("Oracle equivalence", oracle_equivalence),
        ("Metric order invariants", metric_order),
        ("Suggestion determinism, recall and latency", suggestion_determinism_recall_latency),
        ("Corpus round-trip", corpus_round_trip),
        ("Service durability", crash_after_ack),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let v = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            verdict(false, format!("panicked: {msg}"))
        });
        failed += usize::from(!v.pass);
        println!("{} [{}] {name}: {}", if v.pass { "PASS" } else { "FAIL" }, i + 1, v.detail);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
