//! Seeded multi-aspect corpora.
//!
//! Each aspect position owns a disjoint pool of words. An entity writes one
//! sentence per aspect, sampling words from that aspect's pool, so different
//! entities overlap inside a pool but never across pools. Titles are drawn
//! from a small name pool, so one surface form is shared by several
//! entities. A mention's context is sampled from one aspect sentence of its
//! gold entity, plus a little same-pool noise.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{EntityCorpus, EntityRecord, MentionRecord};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub seed: u64,
    pub n_entities: usize,
    /// Sentences per entity (upper bound when `min_aspects` is lower).
    pub aspects_per_entity: usize,
    /// Lower bound on sentences per entity.
    pub min_aspects: usize,
    /// Total size of the aspect word pools.
    pub vocab_size: usize,
    pub n_mentions: usize,
    pub words_per_sentence: usize,
    /// Context words copied from the gold aspect sentence.
    pub context_words: usize,
    /// Extra context words drawn from the same aspect pool.
    pub noise_words: usize,
    /// Entities sharing one title, on average.
    pub entities_per_name: usize,
}

impl SyntheticConfig {
    pub fn new(seed: u64, n_entities: usize, aspects_per_entity: usize, vocab_size: usize) -> Self {
        Self {
            seed,
            n_entities,
            aspects_per_entity,
            min_aspects: aspects_per_entity,
            vocab_size,
            n_mentions: n_entities * aspects_per_entity,
            words_per_sentence: 8,
            context_words: 6,
            noise_words: 2,
            entities_per_name: 4,
        }
    }
}

/// [`generate_synthetic_with`] using the default shape for the given counts.
/// Produces `n_entities * aspects_per_entity` mentions.
pub fn generate_synthetic(
    seed: u64,
    n_entities: usize,
    aspects_per_entity: usize,
    vocab_size: usize,
) -> crate::Result<(EntityCorpus, Vec<MentionRecord>)> {
    generate_synthetic_with(&SyntheticConfig::new(
        seed,
        n_entities,
        aspects_per_entity,
        vocab_size,
    ))
}

pub fn generate_synthetic_with(
    config: &SyntheticConfig,
) -> crate::Result<(EntityCorpus, Vec<MentionRecord>)> {
    let c = config;
    if c.n_entities == 0
        || c.aspects_per_entity == 0
        || c.vocab_size == 0
        || c.min_aspects == 0
        || c.min_aspects > c.aspects_per_entity
        || c.words_per_sentence == 0
        || c.context_words == 0
        || c.entities_per_name == 0
    {
        return Err(crate::Error::InvalidArgument(format!(
            "synthetic corpus counts must be >= 1 and min_aspects <= aspects: {c:?}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
    let pool_size = (c.vocab_size / c.aspects_per_entity).max(1);
    let pools: Vec<Vec<String>> = (0..c.aspects_per_entity)
        .map(|a| (0..pool_size).map(|j| format!("a{a}w{j}")).collect())
        .collect();
    let n_names = (c.n_entities / c.entities_per_name).max(1);

    let width = c.n_entities.to_string().len();
    let mut entities = Vec::with_capacity(c.n_entities);
    let mut sentences: Vec<Vec<Vec<&str>>> = Vec::with_capacity(c.n_entities);
    for e in 0..c.n_entities {
        let n_aspects = rng.gen_range(c.min_aspects..=c.aspects_per_entity);
        let words: Vec<Vec<&str>> = (0..n_aspects)
            .map(|a| {
                (0..c.words_per_sentence)
                    .map(|_| pools[a].choose(&mut rng).expect("pool non-empty").as_str())
                    .collect()
            })
            .collect();
        let description = words
            .iter()
            .map(|s| format!("{}.", s.join(" ")))
            .collect::<Vec<_>>()
            .join(" ");
        entities.push(EntityRecord {
            entity_id: format!("E{e:0width$}"),
            title: format!("Name{}", rng.gen_range(0..n_names)),
            description,
        });
        sentences.push(words);
    }

    let width = c.n_mentions.to_string().len();
    let mut mentions = Vec::with_capacity(c.n_mentions);
    for i in 0..c.n_mentions {
        let gold = i % c.n_entities;
        let aspect = rng.gen_range(0..sentences[gold].len());
        let source = &sentences[gold][aspect];
        let mut context: Vec<&str> = (0..c.context_words)
            .map(|_| *source.choose(&mut rng).expect("sentence non-empty"))
            .collect();
        context
            .extend((0..c.noise_words).map(|_| pools[aspect].choose(&mut rng).unwrap().as_str()));
        context.shuffle(&mut rng);
        let split = rng.gen_range(0..=context.len());
        mentions.push(MentionRecord {
            mention_id: format!("M{i:0width$}"),
            context_left: context[..split].join(" "),
            mention: entities[gold].title.clone(),
            context_right: context[split..].join(" "),
            gold_entity_id: entities[gold].entity_id.clone(),
        });
    }
    Ok((EntityCorpus::new(entities)?, mentions))
}
