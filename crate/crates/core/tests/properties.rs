use std::collections::BTreeSet;

use proptest::prelude::*;
use ragbench_core::eval::{aggregate_runs, bleu, meteor, rouge_l, token_f1};
use ragbench_core::pipelines::{dos_rag_context, raptor_retrieve, vanilla_rag_context, SummaryTree};
use ragbench_core::retrieval::{select_with_mode, HashedBagEmbedder, PassageIndex, SelectionMode, TokenWeighted};
use ragbench_core::text::{Document, SegmentedDocument, TokenCounter, WhitespaceCounter, WordPieceApproxCounter};

fn document() -> impl Strategy<Value = String> {
    let word = prop_oneof![
        "[a-z]{1,9}",
        "[A-Z][a-z]{2,7}",
        "[a-z]{20,40}",
        Just("Dr.".to_string()),
        Just("3.14".to_string()),
        Just("e.g.".to_string()),
    ];
    let sentence = (
        prop::collection::vec(word, 1..40),
        prop_oneof![Just("."), Just("!"), Just("?")],
    )
        .prop_map(|(words, end)| format!("{}{end}", words.join(" ")));
    prop::collection::vec(sentence, 1..30).prop_map(|s| s.join(" "))
}

fn counters() -> Vec<Box<dyn TokenCounter>> {
    vec![Box::new(WhitespaceCounter), Box::new(WordPieceApproxCounter::default())]
}

#[derive(Clone, Debug)]
struct Item(usize);

impl TokenWeighted for Item {
    fn token_count(&self) -> usize {
        self.0
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn passages_cover_the_document_under_the_cap(text in document(), cap in 1usize..120) {
        let doc = Document::synthetic("d", text).unwrap();
        for counter in counters() {
            let seg = SegmentedDocument::build(doc.clone(), counter.as_ref(), cap).unwrap();
            let mut last_end = 0;
            let mut last_span = (0, 0);
            for (i, p) in seg.passages.iter().enumerate() {
                prop_assert_eq!(p.position, i);
                prop_assert!(p.token_count <= cap, "{} > {cap}", p.token_count);
                prop_assert_eq!(p.token_count, counter.count(&p.text));
                prop_assert_eq!(&doc.text[p.byte_span.0..p.byte_span.1], p.text.as_str());
                prop_assert!(p.byte_span.0 >= last_end);
                prop_assert!(doc.text[last_end..p.byte_span.0].trim().is_empty());
                prop_assert!(p.sentence_span >= last_span);
                last_end = p.byte_span.1;
                last_span = p.sentence_span;
            }
            prop_assert!(doc.text[last_end..].trim().is_empty());
            let squash = |t: &str| t.split_whitespace().collect::<String>();
            let joined: String = seg.passages.iter().map(|p| squash(&p.text)).collect();
            prop_assert_eq!(joined, squash(&doc.text));
        }
    }

    #[test]
    fn selection_fits_the_budget_and_nests(
        costs in prop::collection::vec(1usize..200, 0..60),
        b1 in 0usize..3000,
        extra in 0usize..3000,
    ) {
        let items: Vec<Item> = costs.into_iter().map(Item).collect();
        let b2 = b1 + extra;
        for mode in [SelectionMode::PrefixStop, SelectionMode::FillGaps] {
            let small = select_with_mode(&items, b1, mode);
            let large = select_with_mode(&items, b2, mode);
            prop_assert!(small.iter().map(|i| i.0).sum::<usize>() <= b1);
            prop_assert!(large.iter().map(|i| i.0).sum::<usize>() <= b2);
            if mode == SelectionMode::PrefixStop {
                prop_assert!(small.len() <= large.len());
                prop_assert!(small.iter().zip(&large).all(|(a, b)| a.0 == b.0));
            }
        }
    }

    #[test]
    fn dos_and_vanilla_pick_the_same_passages(
        text in document(),
        query in "[a-z]{1,9}( [a-z]{1,9}){0,5}",
        budget in 1usize..2000,
    ) {
        let doc = Document::synthetic("d", text).unwrap();
        let seg = SegmentedDocument::build(doc, &WordPieceApproxCounter::default(), 40).unwrap();
        let e = HashedBagEmbedder::default();
        let index = PassageIndex::build("d", &seg.passages, &e).unwrap();
        let v = vanilla_rag_context(&query, &index, &e, budget).unwrap();
        let d = dos_rag_context(&query, &index, &e, budget).unwrap();
        let vs: BTreeSet<usize> = v.passage_positions().into_iter().collect();
        let ds: Vec<usize> = d.passage_positions();
        prop_assert_eq!(vs, ds.iter().copied().collect::<BTreeSet<_>>());
        prop_assert!(ds.windows(2).all(|w| w[0] < w[1]));
        let scores: Vec<f64> = v.blocks.iter().map(|b| b.score.unwrap()).collect();
        prop_assert!(scores.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(v.total_tokens <= budget);
        prop_assert_eq!(v.total_tokens, d.total_tokens);

        let raptor = raptor_retrieve(&query, &SummaryTree::leaves_only(&index), &e, budget).unwrap();
        prop_assert_eq!(raptor.passage_positions(), v.passage_positions());
        prop_assert_eq!(raptor.total_tokens, v.total_tokens);
    }

    #[test]
    fn metrics_stay_in_unit_range(
        pred in "[a-z ,.]{0,60}",
        refs in prop::collection::vec("[a-z ,.]{1,60}", 1..4),
    ) {
        for score in [
            token_f1(&pred, &refs).unwrap(),
            bleu(&pred, &refs, 1).unwrap(),
            bleu(&pred, &refs, 4).unwrap(),
            rouge_l(&pred, &refs).unwrap(),
            meteor(&pred, &refs).unwrap(),
        ] {
            prop_assert!((0.0..=1.0).contains(&score), "{score}");
        }
    }

    #[test]
    fn reference_order_does_not_matter_and_more_references_never_hurt(
        pred in "[a-c]{1,3}( [a-c]{1,3}){0,8}",
        refs in prop::collection::vec("[a-c]{1,3}( [a-c]{1,3}){0,8}", 1..4),
        extra in "[a-c]{1,3}( [a-c]{1,3}){0,8}",
    ) {
        let mut reversed = refs.clone();
        reversed.reverse();
        let mut more = refs.clone();
        more.push(extra);
        let metrics: [fn(&str, &[String]) -> f64; 5] = [
            |p, r| token_f1(p, r).unwrap(),
            |p, r| bleu(p, r, 1).unwrap(),
            |p, r| bleu(p, r, 4).unwrap(),
            |p, r| rouge_l(p, r).unwrap(),
            |p, r| meteor(p, r).unwrap(),
        ];
        for m in metrics {
            let base = m(&pred, &refs);
            prop_assert!((base - m(&pred, &reversed)).abs() < 1e-12);
            prop_assert!(m(&pred, &more) >= base - 1e-12);
        }
    }

    #[test]
    fn exact_match_scores_one(words in prop::collection::vec("[a-z]{1,8}", 4..20)) {
        let text = words.join(" ");
        let refs = [text.clone()];
        prop_assert!((token_f1(&text, &refs).unwrap() - 1.0).abs() < 1e-12);
        prop_assert!((bleu(&text, &refs, 4).unwrap() - 1.0).abs() < 1e-12);
        prop_assert!((rouge_l(&text, &refs).unwrap() - 1.0).abs() < 1e-12);
        // a single chunk still pays a small fragmentation penalty
        prop_assert!(meteor(&text, &refs).unwrap() > 0.99);
    }

    #[test]
    fn run_statistics_are_bounded(values in prop::collection::vec(0.0f64..1.0, 1..10)) {
        let stats = aggregate_runs(&values).unwrap();
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(stats.mean >= lo - 1e-12 && stats.mean <= hi + 1e-12);
        prop_assert!(stats.std_dev >= 0.0);
        prop_assert_eq!(stats.n_runs, values.len());
    }
}
