//! Compares the analytic NCE gradients against central differences on a
//! batch with in-batch and mined negatives.
//!
//! ```bash
//! cargo run --release --example grad_check
//! ```

use muver::corpus::{build_views, generate_synthetic, ViewPolicy, Vocabulary};
use muver::encoder::DualEncoder;
use muver::pipeline::grad_check_batch;
use muver::trainer::{batch_scores, make_batch, nce_loss, select_views};

fn main() -> muver::Result<()> {
    let (corpus, mentions) = generate_synthetic(2, 10, 3, 60)?;
    let mut vocab = Vocabulary::new();
    let viewsets = corpus
        .iter()
        .map(|e| build_views(e, &mut vocab, 40, ViewPolicy::PerSentence))
        .collect::<muver::Result<Vec<_>>>()?;
    for m in &mentions {
        vocab.tokenize(&format!("{} {}", m.context_left, m.context_right));
    }
    let encoder = DualEncoder::init(vocab, 8, 2)?;

    let batch = make_batch(&encoder, &viewsets, &mentions[..4], &[], 128)?;
    let scores = batch_scores(&encoder, &batch, &select_views(&encoder, &batch));
    println!(
        "in-batch loss {:.6} over {} candidates",
        nce_loss(&scores, &batch.gold)?,
        batch.candidates.len()
    );

    for epsilon in [1e-2, 1e-3, 1e-4, 1e-5] {
        let r = grad_check_batch(&encoder, &viewsets, &mentions, 4, 2, 128, epsilon, 2)?;
        println!(
            "eps {epsilon:e}: max relative error {:.3e} ({} entries, {} non-zero)",
            r.max_relative_error, r.checked, r.nonzero
        );
    }
    Ok(())
}
