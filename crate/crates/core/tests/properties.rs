mod common;

use muver::corpus::{
    build_views, segment_sentences, EntityCorpus, EntityRecord, ViewPolicy, Vocabulary,
};
use muver::encoder::DualEncoder;
use muver::matcher::{build_index, candidate_order, top_k, Candidate};
use muver::trainer::{nce_loss, softmax};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn description() -> impl Strategy<Value = String> {
    prop::collection::vec(
        (
            "[a-z]{1,6}( [a-z0-9]{1,6}){0,12}",
            prop::sample::select(vec![". ", "! ", "? ", ".\n"]),
        ),
        0..10,
    )
    .prop_map(|parts| {
        parts
            .into_iter()
            .map(|(s, end)| format!("{s}{end}"))
            .collect()
    })
}

proptest! {
    #[test]
    fn segmenting_keeps_every_token(text in description()) {
        let mut vocab = Vocabulary::new();
        let whole = vocab.tokenize(&text);
        let joined: Vec<u32> = segment_sentences(&text, &mut vocab).iter().flat_map(|s| s.tokens.iter().copied()).collect();
        prop_assert_eq!(joined, whole.0);
    }

    #[test]
    fn views_are_bounded(text in description(), max in 1usize..12) {
        let e = EntityRecord { entity_id: "e".into(), title: "t".into(), description: text.clone() };
        let mut vocab = Vocabulary::new();
        let vs = build_views(&e, &mut vocab, max, ViewPolicy::PerSentence).unwrap();
        let sentences = segment_sentences(&text, &mut vocab).len();
        prop_assert_eq!(vs.len(), sentences.max(1));
        prop_assert!(vs.views.iter().all(|v| v.token_count() <= max));
    }

    #[test]
    fn top_k_matches_full_sort(scores in prop::collection::vec(-4i32..4, 0..60), k in 1usize..70) {
        let candidates: Vec<Candidate> = scores
            .iter()
            .enumerate()
            .map(|(i, &s)| Candidate { entity_id: format!("e{:02}", i % 23), view_id: i as u32, score: f64::from(s) / 2.0 })
            .collect();
        let mut sorted = candidates.clone();
        sorted.sort_by(candidate_order);
        sorted.truncate(k);
        prop_assert_eq!(top_k(candidates, k), sorted);
    }

    #[test]
    fn softmax_sums_to_one(scores in prop::collection::vec(-50.0f64..50.0, 1..20)) {
        let p = softmax(&scores);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(p.iter().all(|&x| (0.0..=1.0).contains(&x)));
    }

    #[test]
    fn loss_ignores_row_shifts(rows in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 4), 1..6), shift in -100.0f64..100.0) {
        let gold: Vec<usize> = (0..rows.len()).map(|i| i % 4).collect();
        let shifted: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|x| x + shift).collect()).collect();
        let a = nce_loss(&rows, &gold).unwrap();
        let b = nce_loss(&shifted, &gold).unwrap();
        prop_assert!((a - b).abs() < 1e-9 * (1.0 + a.abs()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn parallel_scan_matches_sequential(seed in any::<u64>(), n in 1usize..120, k in 1usize..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let corpus: EntityCorpus = common::corpus(&mut rng, n, 5);
        let m = common::mention(&mut rng, 0, "E000");
        let mut vocab = Vocabulary::new();
        let views: Vec<_> = corpus.iter().map(|e| build_views(e, &mut vocab, 40, ViewPolicy::PerSentence).unwrap()).collect();
        vocab.tokenize(&format!("{} {} {}", m.context_left, m.mention, m.context_right));
        let encoder = DualEncoder::init(vocab, 8, seed).unwrap();
        let index = build_index(&corpus, &views, &encoder).unwrap();
        let q = encoder.encode_mention(&m, 128).unwrap();
        let seq = index.retrieve(&q, k).unwrap();
        prop_assert_eq!(seq.len(), k.min(n));
        prop_assert_eq!(index.retrieve_par(&q, k).unwrap(), seq);
        let bytes = index.to_bytes();
        prop_assert_eq!(muver::matcher::EntityIndex::from_bytes(&bytes).unwrap(), index);
    }
}
