//! Forward and backward passes for one batch with a frozen view selection.

use super::loss::nce_loss_grad;
use crate::corpus::TokenId;
use crate::encoder::{dot, entity_sequence, DualEncoder, EncoderParams};
use crate::matcher::{best_view, ViewSet};
use crate::Result;

/// Pre-assembled token sequences for one batch.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainBatch {
    /// Template sequence of each mention.
    pub mentions: Vec<Vec<TokenId>>,
    /// Per candidate entity, the template sequence of each of its views.
    pub candidates: Vec<Vec<Vec<TokenId>>>,
    /// Candidate column of each mention's gold entity.
    pub gold: Vec<usize>,
}

impl TrainBatch {
    pub fn candidate_views(viewset: &ViewSet) -> Vec<Vec<TokenId>> {
        viewset
            .views
            .iter()
            .map(|v| entity_sequence(&viewset.title_tokens, v.token_ids()))
            .collect()
    }
}

/// Chosen view (position within the candidate's views) per mention and candidate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ViewSelection(pub Vec<Vec<usize>>);

#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrads {
    pub embeddings: Vec<f64>,
    pub projection: Vec<f64>,
}

impl ParamGrads {
    pub fn zeros(params: &EncoderParams) -> Self {
        Self {
            embeddings: vec![0.0; params.embeddings.len()],
            projection: vec![0.0; params.projection.len()],
        }
    }

    fn accumulate(
        &mut self,
        params: &EncoderParams,
        tokens: &[TokenId],
        pooled: &[f64],
        d_out: &[f64],
    ) {
        let dim = params.dim;
        for (r, &d) in d_out.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            for (c, &p) in pooled.iter().enumerate() {
                self.projection[r * dim + c] += d * p;
            }
        }
        // d pooled = P^T d_out, spread evenly over the tokens
        let mut d_pooled = vec![0.0; dim];
        for (r, &d) in d_out.iter().enumerate() {
            for (c, slot) in d_pooled.iter_mut().enumerate() {
                *slot += params.projection[r * dim + c] * d;
            }
        }
        let n = tokens.len().max(1) as f64;
        for &t in tokens {
            let row = params.row_of(t);
            for (c, &d) in d_pooled.iter().enumerate() {
                self.embeddings[row * dim + c] += d / n;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub entity: ParamGrads,
    pub mention: ParamGrads,
}

struct Forward {
    mention_pooled: Vec<Vec<f64>>,
    mention_out: Vec<Vec<f64>>,
    view_pooled: Vec<Vec<Vec<f64>>>,
    view_out: Vec<Vec<Vec<f64>>>,
}

fn forward(encoder: &DualEncoder, batch: &TrainBatch) -> Forward {
    let mention_pooled: Vec<_> = batch
        .mentions
        .iter()
        .map(|s| encoder.mention.pool(s))
        .collect();
    let mention_out = mention_pooled
        .iter()
        .map(|p| encoder.mention.project(p))
        .collect();
    let view_pooled: Vec<Vec<_>> = batch
        .candidates
        .iter()
        .map(|views| views.iter().map(|s| encoder.entity.pool(s)).collect())
        .collect();
    let view_out = view_pooled
        .iter()
        .map(|views| views.iter().map(|p| encoder.entity.project(p)).collect())
        .collect();
    Forward {
        mention_pooled,
        mention_out,
        view_pooled,
        view_out,
    }
}

/// Best view of every candidate for every mention under the current parameters.
pub fn select_views(encoder: &DualEncoder, batch: &TrainBatch) -> ViewSelection {
    let fw = forward(encoder, batch);
    ViewSelection(
        fw.mention_out
            .iter()
            .map(|g| {
                fw.view_out
                    .iter()
                    .map(|views| {
                        best_view(views.iter().enumerate().map(|(v, f)| (v as u32, dot(g, f))))
                            .map_or(0, |(v, _)| v as usize)
                    })
                    .collect()
            })
            .collect(),
    )
}

fn score_matrix(fw: &Forward, selection: &ViewSelection) -> Vec<Vec<f64>> {
    fw.mention_out
        .iter()
        .zip(&selection.0)
        .map(|(g, sel)| {
            sel.iter()
                .enumerate()
                .map(|(j, &v)| dot(g, &fw.view_out[j][v]))
                .collect()
        })
        .collect()
}

/// Selected-view scores for every (mention, candidate) pair.
pub fn batch_scores(
    encoder: &DualEncoder,
    batch: &TrainBatch,
    selection: &ViewSelection,
) -> Vec<Vec<f64>> {
    score_matrix(&forward(encoder, batch), selection)
}

pub fn batch_loss(
    encoder: &DualEncoder,
    batch: &TrainBatch,
    selection: &ViewSelection,
) -> Result<f64> {
    super::loss::nce_loss(&batch_scores(encoder, batch, selection), &batch.gold)
}

/// Loss and exact gradients with the view selection held fixed.
pub fn batch_loss_grad(
    encoder: &DualEncoder,
    batch: &TrainBatch,
    selection: &ViewSelection,
) -> Result<(f64, Gradients)> {
    let fw = forward(encoder, batch);
    let scores = score_matrix(&fw, selection);
    let (loss, d_scores) = nce_loss_grad(&scores, &batch.gold)?;
    let dim = encoder.dim();

    let mut d_mention = vec![vec![0.0; dim]; batch.mentions.len()];
    let mut d_view: Vec<Vec<Option<Vec<f64>>>> = batch
        .candidates
        .iter()
        .map(|views| vec![None; views.len()])
        .collect();
    for (i, row) in d_scores.iter().enumerate() {
        for (j, &ds) in row.iter().enumerate() {
            let v = selection.0[i][j];
            let f = &fw.view_out[j][v];
            for (dm, fx) in d_mention[i].iter_mut().zip(f) {
                *dm += ds * fx;
            }
            let dv = d_view[j][v].get_or_insert_with(|| vec![0.0; dim]);
            for (d, gx) in dv.iter_mut().zip(&fw.mention_out[i]) {
                *d += ds * gx;
            }
        }
    }

    let mut grads = Gradients {
        entity: ParamGrads::zeros(&encoder.entity),
        mention: ParamGrads::zeros(&encoder.mention),
    };
    for (i, d) in d_mention.iter().enumerate() {
        grads.mention.accumulate(
            &encoder.mention,
            &batch.mentions[i],
            &fw.mention_pooled[i],
            d,
        );
    }
    for (j, views) in d_view.iter().enumerate() {
        for (v, d) in views.iter().enumerate() {
            if let Some(d) = d {
                grads.entity.accumulate(
                    &encoder.entity,
                    &batch.candidates[j][v],
                    &fw.view_pooled[j][v],
                    d,
                );
            }
        }
    }
    Ok((loss, grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Vocabulary, CLS, ENT, SEP};

    fn tiny() -> (DualEncoder, TrainBatch) {
        let mut vocab = Vocabulary::new();
        vocab.tokenize("a b c d e");
        let enc = DualEncoder::init(vocab, 3, 4).unwrap();
        let batch = TrainBatch {
            mentions: vec![vec![CLS, 7, 8, SEP], vec![CLS, 9, SEP]],
            candidates: vec![
                vec![vec![CLS, 7, ENT, 8, SEP], vec![CLS, 7, ENT, 11, SEP]],
                vec![vec![CLS, 9, ENT, 10, SEP]],
            ],
            gold: vec![0, 1],
        };
        (enc, batch)
    }

    #[test]
    fn selection_picks_argmax() {
        let (enc, batch) = tiny();
        let sel = select_views(&enc, &batch);
        for (i, g) in batch.mentions.iter().enumerate() {
            let g = enc.mention.encode_tokens(g);
            let s0 = g.dot(&enc.entity.encode_tokens(&batch.candidates[0][0]).0);
            let s1 = g.dot(&enc.entity.encode_tokens(&batch.candidates[0][1]).0);
            assert_eq!(sel.0[i][0], if s1 > s0 { 1 } else { 0 });
            assert_eq!(sel.0[i][1], 0);
        }
    }

    #[test]
    fn loss_matches_grad_path() {
        let (enc, batch) = tiny();
        let sel = select_views(&enc, &batch);
        let (l, _) = batch_loss_grad(&enc, &batch, &sel).unwrap();
        assert_eq!(l, batch_loss(&enc, &batch, &sel).unwrap());
    }

    #[test]
    fn unused_token_has_zero_gradient() {
        let (enc, batch) = tiny();
        let sel = select_views(&enc, &batch);
        let (_, g) = batch_loss_grad(&enc, &batch, &sel).unwrap();
        // id 6 ([PAD]) never appears
        assert!(g.entity.embeddings[6 * 3..7 * 3].iter().all(|&x| x == 0.0));
        assert!(g.mention.embeddings[6 * 3..7 * 3].iter().all(|&x| x == 0.0));
        // id 10 only appears on the entity side
        assert!(g.mention.embeddings[10 * 3..11 * 3]
            .iter()
            .all(|&x| x == 0.0));
        assert!(g.entity.embeddings[10 * 3..11 * 3]
            .iter()
            .any(|&x| x != 0.0));
    }

    #[test]
    fn single_candidate_has_no_signal() {
        let (enc, mut batch) = tiny();
        batch.mentions.truncate(1);
        batch.candidates.truncate(1);
        batch.gold = vec![0];
        let sel = select_views(&enc, &batch);
        let (l, g) = batch_loss_grad(&enc, &batch, &sel).unwrap();
        assert_eq!(l, 0.0);
        for x in g
            .entity
            .embeddings
            .iter()
            .chain(&g.entity.projection)
            .chain(&g.mention.embeddings)
            .chain(&g.mention.projection)
        {
            assert_eq!(*x, 0.0);
        }
    }
}
