//! Invariants over seeded random instances.

use std::collections::BTreeSet;

use cuiwb_core::agreement::{cui_agreement, span_jaccard};
use cuiwb_core::corpus::{export_corpus, import_corpus};
use cuiwb_core::eval_e2e::{framework_eval, framework_eval_merged, merge_gold, E2EPrediction, MatchMode};
use cuiwb_core::eval_norm::{assign_subsets, evaluate_norm, Subset};
use cuiwb_core::suggestion::suggest;
use cuiwb_core::vocabulary::{build_index, parse_vocab_file, VocabularyIndex};
use cuiwb_core::Label;
use cuiwb_testkit::gen;
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::SeedableRng;

fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

fn toy_index() -> VocabularyIndex {
    build_index(parse_vocab_file(include_str!("../../../fixtures/toy_vocab.tsv").as_bytes()).unwrap()).unwrap()
}

fn split(corpus: &cuiwb_core::corpus::Corpus) -> (Vec<cuiwb_core::corpus::Annotation>, Vec<cuiwb_core::corpus::Annotation>) {
    corpus.annotations().iter().cloned().partition(|a| a.annotator_id == "a1")
}

proptest! {
    #[test]
    fn corpus_export_import_is_identity(seed in any::<u64>()) {
        let corpus = gen::random_corpus(&mut rng(seed), &gen::CorpusConfig::default());
        let bytes = export_corpus(&corpus);
        let back = import_corpus(&bytes).unwrap();
        prop_assert_eq!(&back, &corpus);
        prop_assert_eq!(export_corpus(&back), bytes);
    }

    #[test]
    fn jaccard_is_symmetric_and_bounded(seed in any::<u64>()) {
        let corpus = gen::random_corpus(&mut rng(seed), &gen::CorpusConfig::default());
        let (a, b) = split(&corpus);
        let j = span_jaccard(&a, &b);
        prop_assert!((0.0..=1.0).contains(&j));
        prop_assert_eq!(j, span_jaccard(&b, &a));
        prop_assert_eq!(span_jaccard(&a, &a), 1.0);
        prop_assert_eq!(cui_agreement(&a, &b), cui_agreement(&b, &a));
        if let Some(c) = cui_agreement(&a, &b) {
            prop_assert!((0.0..=1.0).contains(&c));
        }
    }

    #[test]
    fn norm_metric_order(seed in any::<u64>()) {
        let inst = gen::random_norm_instance(&mut rng(seed), 60, 5);
        let assignment = assign_subsets(&inst.train, &inst.test, None).unwrap();
        let report = evaluate_norm(&inst.test, &inst.runs, &assignment, Some(&inst.semtypes), inst.semtype_min).unwrap();
        for row in report.subsets.iter().chain(&report.semantic_types) {
            match (row.pooled_acc, row.max_acc, row.avg_acc) {
                (Some(p), Some(m), Some(a)) => prop_assert!(p >= m && m >= a, "{row:?}"),
                (None, None, None) => prop_assert_eq!(row.example_count, 0),
                _ => prop_assert!(false, "partially defined row {row:?}"),
            }
        }
        for span in &inst.test {
            prop_assert!(!(assignment.contains(&span.span_id, Subset::UnpopularCui)
                && assignment.contains(&span.span_id, Subset::UnseenText)));
        }
    }

    #[test]
    fn e2e_counts_are_ordered(seed in any::<u64>()) {
        let inst = gen::random_e2e_instance(&mut rng(seed), 60);
        let (a, b) = split(&inst.corpus);
        for mode in [MatchMode::Exact, MatchMode::Overlap] {
            let r = framework_eval(&a, &b, &inst.predictions, mode, Some(&inst.semtypes), 0);
            for row in std::iter::once(&r.overall).chain(&r.semantic_types) {
                prop_assert!(row.cuis_correct <= row.spans_correct);
                prop_assert!(row.spans_correct <= row.gold_count);
                if let (Some(c), Some(s)) = (row.cuis_correct_pct, row.spans_correct_pct) {
                    prop_assert!(c <= s);
                }
                match row.cui_precision {
                    Some(p) => prop_assert_eq!(p, row.cuis_correct as f64 / row.spans_correct as f64),
                    None => prop_assert_eq!(row.spans_correct, 0),
                }
            }
            let c = r.compound.unwrap();
            prop_assert_eq!(c.recovered + c.missed, c.maximal_compound_count);
            prop_assert!(c.missed_with_subspan_credit <= c.missed);
        }
    }

    #[test]
    fn overlap_never_recognizes_less_than_exact(seed in any::<u64>()) {
        let inst = gen::random_e2e_instance(&mut rng(seed), 60);
        let gold = merge_gold(inst.corpus.annotations());
        let exact = framework_eval_merged(&gold, &inst.predictions, MatchMode::Exact, None, 0);
        let overlap = framework_eval_merged(&gold, &inst.predictions, MatchMode::Overlap, None, 0);
        prop_assert!(overlap.overall.spans_correct >= exact.overall.spans_correct);
        prop_assert!(overlap.overall.cuis_correct >= exact.overall.cuis_correct);
    }

    #[test]
    fn adding_a_prediction_never_hurts(seed in any::<u64>(), extra_at in any::<prop::sample::Index>()) {
        let inst = gen::random_e2e_instance(&mut rng(seed), 60);
        let gold = merge_gold(inst.corpus.annotations());
        prop_assume!(!gold.is_empty());
        let g = &gold[extra_at.index(gold.len())];
        let mut more = inst.predictions.clone();
        more.push(E2EPrediction {
            doc_id: g.doc_id.clone(),
            start: g.start,
            end: g.end,
            cui: Label::Cui(g.cuis.iter().next().unwrap().clone()),
        });
        for mode in [MatchMode::Exact, MatchMode::Overlap] {
            let before = framework_eval_merged(&gold, &inst.predictions, mode, None, 0);
            let after = framework_eval_merged(&gold, &more, mode, None, 0);
            prop_assert!(after.overall.spans_correct >= before.overall.spans_correct);
            prop_assert!(after.overall.cuis_correct >= before.overall.cuis_correct);
            let (cb, ca) = (before.compound.unwrap(), after.compound.unwrap());
            prop_assert!(ca.recovered >= cb.recovered);
        }
    }

    #[test]
    fn suggestions_are_well_formed(query in "[a-z ]{0,20}|pt|asthma|severe asthma|chest pain", k in 1usize..20) {
        let idx = toy_index();
        let r = suggest(&idx, &query, k);
        // Only the partial list is truncated.
        prop_assert!(r.partial.len() <= k);
        let cuis: Vec<_> = r.direct.iter().chain(&r.partial).map(|s| s.cui.clone()).collect();
        let distinct: BTreeSet<_> = cuis.iter().collect();
        prop_assert_eq!(distinct.len(), cuis.len());
        // A larger k only extends the list.
        let wider = suggest(&idx, &query, k + 5);
        prop_assert_eq!(&wider.direct, &r.direct);
        prop_assert_eq!(&wider.partial[..r.partial.len()], &r.partial[..]);
    }
}
