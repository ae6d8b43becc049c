//! The best-view score never exceeds the exhaustive best subset of
//! sentences; this prints how far apart the two are for random mentions.
//!
//! ```bash
//! cargo run --release --example subset_oracle
//! ```

use muver::corpus::{build_views, generate_synthetic, ViewPolicy, Vocabulary};
use muver::encoder::DualEncoder;
use muver::matcher::{
    build_index, matching_score, optimal_subset_oracle, restricted_subset_oracle,
};

fn main() -> muver::Result<()> {
    let (corpus, mentions) = generate_synthetic(9, 20, 6, 400)?;
    let mut vocab = Vocabulary::new();
    let viewsets = corpus
        .iter()
        .map(|e| build_views(e, &mut vocab, 40, ViewPolicy::PerSentence))
        .collect::<muver::Result<Vec<_>>>()?;
    let encoder = DualEncoder::init(vocab, 16, 9)?;
    let index = build_index(&corpus, &viewsets, &encoder)?;

    println!(
        "{:<6} {:<6} {:>11} {:>11} {:>11}  best subset",
        "mention", "entity", "best view", "pairs", "any subset"
    );
    for m in mentions.iter().take(8) {
        let query = encoder.encode_mention(m, 128)?;
        let pos = corpus
            .position(&m.gold_entity_id)
            .expect("gold entity exists");
        let (_, view_score) = matching_score(&query.0, &index.entities[pos])?;
        let pairs = restricted_subset_oracle(&query, &viewsets[pos], &encoder, 2)?;
        let full = optimal_subset_oracle(&query, &viewsets[pos], &encoder)?;
        println!(
            "{:<7} {:<6} {:>11.6} {:>11.6} {:>11.6}  {:?}",
            m.mention_id, m.gold_entity_id, view_score, pairs.score, full.score, full.sentences
        );
    }
    Ok(())
}
