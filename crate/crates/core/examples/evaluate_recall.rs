//! Recall@k, the length-binned error table and a side-by-side comparison of
//! an untrained and a trained encoder on the same variable-length corpus.
//!
//! ```bash
//! cargo run --release --example evaluate_recall
//! ```

use muver::corpus::{
    build_views, generate_synthetic_with, SyntheticConfig, ViewPolicy, Vocabulary,
};
use muver::encoder::{DualEncoder, InitMode};
use muver::evaluator::{
    compare_configs, length_binned_errors, recall_at_k, render_bins, DEFAULT_KS,
};
use muver::matcher::build_index;
use muver::trainer::{train, TrainConfig};

fn main() -> muver::Result<()> {
    let mut synth = SyntheticConfig::new(5, 120, 8, 2000);
    synth.min_aspects = 1;
    let (corpus, mentions) = generate_synthetic_with(&synth)?;
    let mut vocab = Vocabulary::new();
    let viewsets = corpus
        .iter()
        .map(|e| build_views(e, &mut vocab, 40, ViewPolicy::PerSentence))
        .collect::<muver::Result<Vec<_>>>()?;

    let config = TrainConfig {
        learning_rate: 0.5,
        ..TrainConfig::default()
    };
    let init = DualEncoder::init_with(vocab, config.dim, 5, InitMode::Tied)?;
    let trained = train(&config, init.clone(), &corpus, &viewsets, &mentions)?.encoder;

    let mut reports = Vec::new();
    for (label, encoder) in [("untrained", &init), ("trained", &trained)] {
        let index = build_index(&corpus, &viewsets, encoder)?;
        let results = index.retrieve_mentions(encoder, &mentions, config.max_ctx_tokens, 64)?;
        println!("{label}: error rate by gold description length");
        print!(
            "{}",
            render_bins(&length_binned_errors(
                &results,
                &mentions,
                &viewsets,
                &[1, 4, 16],
                2
            )?)
        );
        reports.push(recall_at_k(&results, &mentions, &DEFAULT_KS, label)?);
    }
    println!();
    print!("{}", compare_configs(&reports)?);
    Ok(())
}
