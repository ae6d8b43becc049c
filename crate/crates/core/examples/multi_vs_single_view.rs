//! Trains a one-vector encoder and a multi-view encoder from the same tied
//! initialization with the same budget, then compares held-out recall@k
//! overall and by description length.
//!
//! With no argument every entity has four aspect sentences; `varied` draws
//! one to eight per entity so that the length bins separate.
//!
//! ```bash
//! cargo run --release --example multi_vs_single_view -- [varied]
//! ```

use muver::corpus::{
    build_views, generate_synthetic_with, single_view, SyntheticConfig, ViewPolicy, Vocabulary,
};
use muver::encoder::DualEncoder;
use muver::evaluator::{
    compare_configs, length_binned_errors, recall_at_k, render_bins, DEFAULT_KS,
};
use muver::matcher::build_index;
use muver::merger::{heuristic_search, MergeConfig};
use muver::trainer::{train, TrainConfig};

fn main() -> muver::Result<()> {
    let varied = std::env::args().nth(1).is_some_and(|a| a == "varied");
    let mut synth = SyntheticConfig::new(1, 200, if varied { 8 } else { 4 }, 2000);
    synth.min_aspects = if varied { 1 } else { 4 };
    synth.n_mentions = 800;
    let (corpus, mentions) = generate_synthetic_with(&synth)?;
    let (train_mentions, test_mentions) = mentions.split_at(600);

    let mut vocab = Vocabulary::new();
    let multi = corpus
        .iter()
        .map(|e| build_views(e, &mut vocab, 40, ViewPolicy::PerSentence))
        .collect::<muver::Result<Vec<_>>>()?;
    let single = corpus
        .iter()
        .map(|e| single_view(e, &vocab, 40))
        .collect::<muver::Result<Vec<_>>>()?;

    let config = TrainConfig {
        epochs: 20,
        learning_rate: 0.5,
        ..TrainConfig::default()
    };
    let init = DualEncoder::init_with(vocab, config.dim, 1, config.init)?;
    let mut reports = Vec::new();
    for (label, viewsets) in [("single", &single), ("multi", &multi)] {
        let encoder = train(&config, init.clone(), &corpus, viewsets, train_mentions)?.encoder;
        let indexed: Vec<_> = if label == "multi" {
            viewsets
                .iter()
                .map(|v| heuristic_search(v, &encoder, &MergeConfig::default()))
                .collect()
        } else {
            viewsets.clone()
        };
        let index = build_index(&corpus, &indexed, &encoder)?;
        let results =
            index.retrieve_mentions(&encoder, test_mentions, config.max_ctx_tokens, 64)?;
        println!(
            "{label}: {:.2} views per entity, error by sentence count",
            index.mean_views()
        );
        print!(
            "{}",
            render_bins(&length_binned_errors(
                &results,
                test_mentions,
                &multi,
                &[1, 4, 16],
                4
            )?)
        );
        reports.push(recall_at_k(&results, test_mentions, &DEFAULT_KS, label)?);
    }
    println!();
    print!("{}", compare_configs(&reports)?);
    Ok(())
}
