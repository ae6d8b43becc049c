#![allow(dead_code)]

use muver::corpus::{EntityCorpus, EntityRecord, MentionRecord};
use rand::seq::SliceRandom;
use rand::Rng;

const WORDS: &[&str] = &[
    "river", "stone", "king", "film", "guitar", "orbit", "paper", "ocean", "court", "engine",
    "tower", "maple", "signal", "harbor", "violin", "crater", "league", "poem", "castle",
    "circuit", "desert", "glacier", "novel", "planet", "senate", "temple", "tiger", "valley",
    "winter", "zinc",
];

pub fn sentence<R: Rng>(rng: &mut R, max_words: usize) -> String {
    let n = rng.gen_range(1..=max_words);
    let words: Vec<&str> = (0..n).map(|_| *WORDS.choose(rng).unwrap()).collect();
    format!("{}.", words.join(" "))
}

pub fn entity<R: Rng>(rng: &mut R, id: usize, sentences: usize) -> EntityRecord {
    let description: Vec<String> = (0..sentences).map(|_| sentence(rng, 9)).collect();
    EntityRecord {
        entity_id: format!("E{id:03}"),
        title: format!("{} {}", WORDS.choose(rng).unwrap(), id),
        description: description.join(" "),
    }
}

pub fn corpus<R: Rng>(rng: &mut R, n: usize, max_sentences: usize) -> EntityCorpus {
    let entities = (0..n)
        .map(|i| {
            let k = rng.gen_range(0..=max_sentences);
            entity(rng, i, k)
        })
        .collect();
    EntityCorpus::new(entities).unwrap()
}

pub fn mention<R: Rng>(rng: &mut R, id: usize, gold: &str) -> MentionRecord {
    MentionRecord {
        mention_id: format!("M{id:03}"),
        context_left: sentence(rng, 8),
        mention: WORDS.choose(rng).unwrap().to_string(),
        context_right: sentence(rng, 8),
        gold_entity_id: gold.into(),
    }
}
