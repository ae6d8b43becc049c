//! Trains the dual encoder with the NCE objective on a synthetic corpus and
//! prints the loss per epoch, with and without mined hard negatives.
//!
//! ```bash
//! cargo run --release --example train_dual_encoder
//! ```

use muver::corpus::{build_views, generate_synthetic, ViewPolicy, Vocabulary};
use muver::encoder::{DualEncoder, InitMode};
use muver::trainer::{train, LogRecord, TrainConfig};

fn epoch_means(log: &[LogRecord]) -> Vec<f64> {
    let epochs = log.last().map_or(0, |r| r.epoch + 1);
    (0..epochs)
        .map(|e| {
            let losses: Vec<f64> = log
                .iter()
                .filter(|r| r.epoch == e)
                .map(|r| r.loss)
                .collect();
            losses.iter().sum::<f64>() / losses.len() as f64
        })
        .collect()
}

fn main() -> muver::Result<()> {
    let (corpus, mentions) = generate_synthetic(7, 100, 4, 800)?;
    let mut vocab = Vocabulary::new();
    let viewsets = corpus
        .iter()
        .map(|e| build_views(e, &mut vocab, 40, ViewPolicy::PerSentence))
        .collect::<muver::Result<Vec<_>>>()?;

    for n_hard_negatives in [0, 4] {
        let config = TrainConfig {
            epochs: 8,
            learning_rate: 0.5,
            n_hard_negatives,
            ..TrainConfig::default()
        };
        let init = DualEncoder::init_with(vocab.clone(), config.dim, config.seed, InitMode::Tied)?;
        let outcome = train(&config, init, &corpus, &viewsets, &mentions)?;
        println!(
            "hard negatives {n_hard_negatives}: {} steps",
            outcome.log.len()
        );
        for (epoch, loss) in epoch_means(&outcome.log).iter().enumerate() {
            println!("  epoch {epoch}: mean loss {loss:.5}");
        }
        println!("  checkpoint fingerprint {}", outcome.encoder.fingerprint());
    }
    Ok(())
}
