//! NCE training of both encoders over in-batch negatives and optional mined
//! hard negatives.
//!
//! Each step picks, for every (mention, candidate) pair, the candidate view
//! that currently scores highest, then differentiates the loss with that
//! choice held fixed.

mod batch;
mod config;
mod gradcheck;
mod loss;
mod negatives;

use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{EntityCorpus, MentionRecord, TokenId};
use crate::encoder::DualEncoder;
use crate::matcher::{build_index, ViewSet};
use crate::{Error, Result};

pub use batch::{
    batch_loss, batch_loss_grad, batch_scores, select_views, Gradients, ParamGrads, TrainBatch,
    ViewSelection,
};
pub use config::{Optimizer, TrainConfig};
pub use gradcheck::{grad_check, GradCheckReport, DENOMINATOR_FLOOR, GRAD_CHECK_SAMPLES};
pub use loss::{nce_loss, nce_loss_grad, softmax};
pub use negatives::mine_hard_negatives;

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub step: usize,
    pub epoch: usize,
    pub loss: f64,
    pub learning_rate: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub encoder: DualEncoder,
    pub log: Vec<LogRecord>,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

struct Moments {
    first: Vec<f64>,
    second: Vec<f64>,
}

impl Moments {
    fn new(len: usize) -> Self {
        Self {
            first: vec![0.0; len],
            second: vec![0.0; len],
        }
    }
}

struct OptimizerState {
    kind: Optimizer,
    step: i32,
    moments: Vec<Moments>,
}

impl OptimizerState {
    fn new(kind: Optimizer, encoder: &DualEncoder) -> Self {
        let moments = match kind {
            Optimizer::Sgd => Vec::new(),
            Optimizer::Adam => [&encoder.entity, &encoder.mention]
                .into_iter()
                .flat_map(|p| {
                    [
                        Moments::new(p.embeddings.len()),
                        Moments::new(p.projection.len()),
                    ]
                })
                .collect(),
        };
        Self {
            kind,
            step: 0,
            moments,
        }
    }

    fn apply(&mut self, encoder: &mut DualEncoder, grads: &Gradients, lr: f64, weight_decay: f64) {
        self.step += 1;
        let targets: [(&mut Vec<f64>, &Vec<f64>); 4] = [
            (&mut encoder.entity.embeddings, &grads.entity.embeddings),
            (&mut encoder.entity.projection, &grads.entity.projection),
            (&mut encoder.mention.embeddings, &grads.mention.embeddings),
            (&mut encoder.mention.projection, &grads.mention.projection),
        ];
        match self.kind {
            Optimizer::Sgd => {
                for (params, grad) in targets {
                    for (p, g) in params.iter_mut().zip(grad) {
                        *p -= lr * (g + weight_decay * *p);
                    }
                }
            }
            Optimizer::Adam => {
                let c1 = 1.0 - BETA1.powi(self.step);
                let c2 = 1.0 - BETA2.powi(self.step);
                for ((params, grad), m) in targets.into_iter().zip(&mut self.moments) {
                    for (i, (p, &g)) in params.iter_mut().zip(grad.iter()).enumerate() {
                        m.first[i] = BETA1 * m.first[i] + (1.0 - BETA1) * g;
                        m.second[i] = BETA2 * m.second[i] + (1.0 - BETA2) * g * g;
                        let update = (m.first[i] / c1) / ((m.second[i] / c2).sqrt() + ADAM_EPS);
                        *p -= lr * (update + weight_decay * *p);
                    }
                }
            }
        }
    }
}

/// Pre-tokenized training data.
struct Prepared {
    mentions: Vec<Vec<TokenId>>,
    gold: Vec<usize>,
    views: Vec<Vec<Vec<TokenId>>>,
}

fn prepare(
    encoder: &DualEncoder,
    viewsets: &[ViewSet],
    mentions: &[MentionRecord],
    max_ctx_tokens: usize,
) -> Result<(Prepared, HashMap<String, usize>)> {
    let by_id: HashMap<String, usize> = viewsets
        .iter()
        .enumerate()
        .map(|(i, v)| (v.entity_id.clone(), i))
        .collect();
    let gold = mentions
        .iter()
        .map(|m| {
            by_id
                .get(&m.gold_entity_id)
                .copied()
                .ok_or_else(|| Error::MissingViewSet(m.gold_entity_id.clone()))
        })
        .collect::<Result<_>>()?;
    let tokens = mentions
        .iter()
        .map(|m| encoder.mention_tokens(m, max_ctx_tokens))
        .collect::<Result<_>>()?;
    Ok((
        Prepared {
            mentions: tokens,
            gold,
            views: viewsets.iter().map(TrainBatch::candidate_views).collect(),
        },
        by_id,
    ))
}

/// Candidates are the batch's distinct gold entities in order of first
/// appearance, followed by any mined negatives not already present.
fn assemble_batch(data: &Prepared, members: &[usize], negatives: &[Vec<usize>]) -> TrainBatch {
    let mut order: Vec<usize> = Vec::new();
    let mut column: HashMap<usize, usize> = HashMap::new();
    let mut add = |e: usize, order: &mut Vec<usize>| {
        *column.entry(e).or_insert_with(|| {
            order.push(e);
            order.len() - 1
        })
    };
    let gold: Vec<usize> = members
        .iter()
        .map(|&m| add(data.gold[m], &mut order))
        .collect();
    for &m in members {
        if let Some(negs) = negatives.get(m) {
            for &e in negs {
                add(e, &mut order);
            }
        }
    }
    TrainBatch {
        mentions: members.iter().map(|&m| data.mentions[m].clone()).collect(),
        candidates: order.iter().map(|&e| data.views[e].clone()).collect(),
        gold,
    }
}

/// Trains `encoder` in place of a fresh copy and returns it with the loss log.
/// Deterministic given the config seed.
pub fn train(
    config: &TrainConfig,
    encoder: DualEncoder,
    corpus: &EntityCorpus,
    viewsets: &[ViewSet],
    mentions: &[MentionRecord],
) -> Result<TrainOutcome> {
    config.validate()?;
    if config.epochs == 0 {
        return Ok(TrainOutcome {
            encoder,
            log: Vec::new(),
        });
    }
    if config.batch_size > mentions.len() {
        return Err(Error::InvalidArgument(format!(
            "batch_size {} exceeds the {} training mentions",
            config.batch_size,
            mentions.len()
        )));
    }
    let mut encoder = encoder;
    let (data, by_id) = prepare(&encoder, viewsets, mentions, config.max_ctx_tokens)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut optimizer = OptimizerState::new(config.optimizer, &encoder);
    let steps_per_epoch = mentions.len().div_ceil(config.batch_size);
    let total_steps = steps_per_epoch * config.epochs;
    let mut order: Vec<usize> = (0..mentions.len()).collect();
    let mut log = Vec::with_capacity(total_steps);
    let mut step = 0;

    for epoch in 0..config.epochs {
        let negatives: Vec<Vec<usize>> = if config.n_hard_negatives > 0 {
            let index = build_index(corpus, viewsets, &encoder)?;
            let mined = mine_hard_negatives(
                &index,
                mentions,
                &encoder,
                config.n_hard_negatives,
                config.max_ctx_tokens,
            )?;
            mentions
                .iter()
                .map(|m| mined[&m.mention_id].iter().map(|e| by_id[e]).collect())
                .collect()
        } else {
            Vec::new()
        };
        order.shuffle(&mut rng);
        for members in order.chunks(config.batch_size) {
            let batch = assemble_batch(&data, members, &negatives);
            let selection = select_views(&encoder, &batch);
            let (loss, grads) = batch_loss_grad(&encoder, &batch, &selection)?;
            let lr = config.rate_at(step, total_steps);
            optimizer.apply(&mut encoder, &grads, lr, config.weight_decay);
            log.push(LogRecord {
                step,
                epoch,
                loss,
                learning_rate: lr,
            });
            step += 1;
        }
    }
    if !encoder.entity.is_finite() || !encoder.mention.is_finite() {
        return Err(Error::InvalidArgument(
            "training diverged to non-finite parameters".into(),
        ));
    }
    Ok(TrainOutcome { encoder, log })
}

/// Groups hard negatives by mention id into a batch-ready list of positions.
pub fn negatives_by_position(
    mined: &BTreeMap<String, Vec<String>>,
    mentions: &[MentionRecord],
    viewsets: &[ViewSet],
) -> Vec<Vec<usize>> {
    let by_id: HashMap<&str, usize> = viewsets
        .iter()
        .enumerate()
        .map(|(i, v)| (v.entity_id.as_str(), i))
        .collect();
    mentions
        .iter()
        .map(|m| {
            mined
                .get(&m.mention_id)
                .map(|negs| {
                    negs.iter()
                        .filter_map(|e| by_id.get(e.as_str()).copied())
                        .collect()
                })
                .unwrap_or_default()
        })
        .collect()
}

/// Builds a [`TrainBatch`] for `mentions` with in-batch negatives plus
/// `extra` negatives per mention (positions into `viewsets`).
pub fn make_batch(
    encoder: &DualEncoder,
    viewsets: &[ViewSet],
    mentions: &[MentionRecord],
    extra: &[Vec<usize>],
    max_ctx_tokens: usize,
) -> Result<TrainBatch> {
    let (data, _) = prepare(encoder, viewsets, mentions, max_ctx_tokens)?;
    let members: Vec<usize> = (0..mentions.len()).collect();
    Ok(assemble_batch(&data, &members, extra))
}
