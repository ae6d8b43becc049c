//! Central finite-difference check of the analytic batch gradients.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::batch::{batch_loss, batch_loss_grad, select_views, TrainBatch};
use crate::encoder::DualEncoder;
use crate::Result;

/// Entries checked per parameter matrix (all of them when smaller).
pub const GRAD_CHECK_SAMPLES: usize = 100;

/// Lower bound on the relative-error denominator, so entries whose true
/// gradient is tiny are compared on an absolute scale.
pub const DENOMINATOR_FLOOR: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub checked: usize,
    /// Checked entries whose analytic gradient is non-zero.
    pub nonzero: usize,
}

#[derive(Clone, Copy)]
enum Slot {
    EntityEmb,
    EntityProj,
    MentionEmb,
    MentionProj,
}

fn slot_mut(encoder: &mut DualEncoder, slot: Slot) -> &mut Vec<f64> {
    match slot {
        Slot::EntityEmb => &mut encoder.entity.embeddings,
        Slot::EntityProj => &mut encoder.entity.projection,
        Slot::MentionEmb => &mut encoder.mention.embeddings,
        Slot::MentionProj => &mut encoder.mention.projection,
    }
}

/// Largest relative error between analytic and central-difference gradients
/// over a seeded sample of at least [`GRAD_CHECK_SAMPLES`] entries per
/// matrix. The view selection made at `encoder` is reused for every
/// perturbed evaluation.
pub fn grad_check(
    encoder: &DualEncoder,
    batch: &TrainBatch,
    epsilon: f64,
    seed: u64,
) -> Result<GradCheckReport> {
    let selection = select_views(encoder, batch);
    let (_, grads) = batch_loss_grad(encoder, batch, &selection)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut work = encoder.clone();
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        checked: 0,
        nonzero: 0,
    };
    let plan = [
        (Slot::EntityEmb, &grads.entity.embeddings),
        (Slot::EntityProj, &grads.entity.projection),
        (Slot::MentionEmb, &grads.mention.embeddings),
        (Slot::MentionProj, &grads.mention.projection),
    ];
    for (slot, analytic) in plan {
        let len = analytic.len();
        let picks = sample(&mut rng, len, GRAD_CHECK_SAMPLES.min(len));
        for idx in picks.iter() {
            let original = slot_mut(&mut work, slot)[idx];
            slot_mut(&mut work, slot)[idx] = original + epsilon;
            let plus = batch_loss(&work, batch, &selection)?;
            slot_mut(&mut work, slot)[idx] = original - epsilon;
            let minus = batch_loss(&work, batch, &selection)?;
            slot_mut(&mut work, slot)[idx] = original;

            let numeric = (plus - minus) / (2.0 * epsilon);
            let a = analytic[idx];
            let denom = a.abs().max(numeric.abs()).max(DENOMINATOR_FLOOR);
            let err = (a - numeric).abs() / denom;
            report.max_relative_error = report.max_relative_error.max(err);
            report.checked += 1;
            if a != 0.0 {
                report.nonzero += 1;
            }
        }
    }
    Ok(report)
}
