//! Iterative view merging: distant-pair versus close-pair unions, with the
//! views-per-entity count after every round.
//!
//! ```bash
//! cargo run --release --example merge_views
//! ```

use muver::corpus::{build_views, generate_synthetic, ViewPolicy, Vocabulary};
use muver::encoder::DualEncoder;
use muver::merger::{heuristic_search_traced, MergeConfig, MergeStrategy};

fn main() -> muver::Result<()> {
    let (corpus, _) = generate_synthetic(3, 50, 6, 600)?;
    let mut vocab = Vocabulary::new();
    let viewsets = corpus
        .iter()
        .map(|e| build_views(e, &mut vocab, 40, ViewPolicy::PerSentence))
        .collect::<muver::Result<Vec<_>>>()?;
    let encoder = DualEncoder::init(vocab, 16, 3)?;

    let mut merged = Vec::new();
    for strategy in [MergeStrategy::Distant, MergeStrategy::Close] {
        let config = MergeConfig {
            strategy,
            ..MergeConfig::default()
        };
        let mut per_round = vec![0usize; config.max_iters + 1];
        let mut out = Vec::new();
        for vs in &viewsets {
            let (m, trace) = heuristic_search_traced(vs, &encoder, &config);
            for (r, c) in trace.counts.iter().enumerate() {
                per_round[r] += c;
            }
            out.push(m);
        }
        let rounds: Vec<String> = per_round
            .iter()
            .map(|t| format!("{:.2}", *t as f64 / viewsets.len() as f64))
            .collect();
        println!("{strategy}: mean views per round [{}]", rounds.join(", "));
        merged.push(out);
    }

    let first = &viewsets[0];
    for (label, sets) in ["distant", "close"].iter().zip(&merged) {
        let added: Vec<Vec<u32>> = sets[0].views[first.basic_count..]
            .iter()
            .map(|v| v.sentence_indices())
            .collect();
        println!("{} {label} unions: {added:?}", first.entity_id);
    }
    let differ = merged[0]
        .iter()
        .zip(&merged[1])
        .filter(|(a, b)| a != b)
        .count();
    println!(
        "strategies disagree on {differ}/{} entities",
        viewsets.len()
    );
    Ok(())
}
