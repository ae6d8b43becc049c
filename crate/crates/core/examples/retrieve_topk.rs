//! Builds a multi-view index, saves and reloads it, and prints the top
//! candidates for a few mentions together with the view that matched.
//!
//! ```bash
//! cargo run --release --example retrieve_topk
//! ```

use muver::corpus::{build_views, generate_synthetic, ViewPolicy, Vocabulary};
use muver::encoder::{DualEncoder, InitMode};
use muver::matcher::{build_index, EntityIndex};

fn main() -> muver::Result<()> {
    let (corpus, mentions) = generate_synthetic(11, 40, 4, 400)?;
    let mut vocab = Vocabulary::new();
    let viewsets = corpus
        .iter()
        .map(|e| build_views(e, &mut vocab, 40, ViewPolicy::PerSentence))
        .collect::<muver::Result<Vec<_>>>()?;
    let encoder = DualEncoder::init_with(vocab, 16, 11, InitMode::Tied)?;
    let index = build_index(&corpus, &viewsets, &encoder)?;

    let path = std::env::temp_dir().join(format!("muver-example-{}.idx", std::process::id()));
    index.save(&path)?;
    let loaded = EntityIndex::load(&path)?;
    std::fs::remove_file(&path).ok();
    assert_eq!(loaded, index);
    println!(
        "index: {} entities, {} vectors, built by {}",
        loaded.len(),
        loaded.vector_count(),
        loaded.fingerprint
    );

    for m in mentions.iter().take(3) {
        let query = encoder.encode_mention(m, 128)?;
        println!(
            "{} `{}` (gold {})",
            m.mention_id, m.mention, m.gold_entity_id
        );
        for c in loaded.retrieve(&query, 5)? {
            let marker = if c.entity_id == m.gold_entity_id {
                '*'
            } else {
                ' '
            };
            println!(
                "  {marker} {} view {} score {:.6}",
                c.entity_id, c.view_id, c.score
            );
        }
        assert_eq!(loaded.retrieve_par(&query, 5)?, loaded.retrieve(&query, 5)?);
    }
    Ok(())
}
