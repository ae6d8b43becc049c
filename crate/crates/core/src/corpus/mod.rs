//! Entity and mention records, their line-delimited JSON files, text
//! processing and view construction.

mod synth;
mod text;
mod views;

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use synth::{generate_synthetic, generate_synthetic_with, SyntheticConfig};
pub use text::{
    segment_sentences, segment_sentences_frozen, sentence_spans, split_words, Sentence,
    SentenceList, TokenId, TokenSequence, Vocabulary, CLS, ENT, MENTION_END, MENTION_START, PAD,
    RESERVED, SEP, UNK,
};
pub use views::{build_views, build_views_frozen, single_view, ViewPolicy};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityRecord {
    pub entity_id: String,
    pub title: String,
    #[serde(default)]
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MentionRecord {
    pub mention_id: String,
    #[serde(default)]
    pub context_left: String,
    pub mention: String,
    #[serde(default)]
    pub context_right: String,
    pub gold_entity_id: String,
}

/// Knowledge base in ingestion order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EntityCorpus {
    entities: Vec<EntityRecord>,
    positions: HashMap<String, usize>,
}

impl EntityCorpus {
    /// Builds a corpus, rejecting empty ids, empty titles and duplicate ids.
    pub fn new(entities: Vec<EntityRecord>) -> Result<Self> {
        let mut positions = HashMap::with_capacity(entities.len());
        for (pos, entity) in entities.iter().enumerate() {
            validate_entity(entity).map_err(Error::InvalidArgument)?;
            if positions.insert(entity.entity_id.clone(), pos).is_some() {
                return Err(Error::InvalidArgument(format!(
                    "duplicate entity id `{}`",
                    entity.entity_id
                )));
            }
        }
        Ok(Self {
            entities,
            positions,
        })
    }

    pub fn len(&self) -> usize {
        self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    pub fn entities(&self) -> &[EntityRecord] {
        &self.entities
    }

    pub fn iter(&self) -> std::slice::Iter<'_, EntityRecord> {
        self.entities.iter()
    }

    pub fn get(&self, entity_id: &str) -> Option<&EntityRecord> {
        self.position(entity_id).map(|p| &self.entities[p])
    }

    pub fn position(&self, entity_id: &str) -> Option<usize> {
        self.positions.get(entity_id).copied()
    }

    pub fn contains(&self, entity_id: &str) -> bool {
        self.positions.contains_key(entity_id)
    }
}

fn validate_entity(entity: &EntityRecord) -> std::result::Result<(), String> {
    if entity.entity_id.is_empty() {
        return Err("empty entity_id".into());
    }
    if entity.title.trim().is_empty() {
        return Err(format!("entity `{}` has an empty title", entity.entity_id));
    }
    Ok(())
}

fn read_lines<T, F>(path: &Path, mut parse: F) -> Result<Vec<T>>
where
    F: FnMut(usize, &str) -> Result<T>,
{
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(parse(i + 1, &line)?);
    }
    Ok(out)
}

/// Reads an entities file: one JSON object per line with `entity_id`,
/// `title` and `description`.
pub fn load_entities(path: impl AsRef<Path>) -> Result<EntityCorpus> {
    let path = path.as_ref();
    let mut seen: HashMap<String, usize> = HashMap::new();
    let records = read_lines(path, |line_no, line| {
        let record: EntityRecord = serde_json::from_str(line).map_err(|e| Error::Malformed {
            path: path.into(),
            line: line_no,
            message: e.to_string(),
        })?;
        validate_entity(&record).map_err(|message| Error::Malformed {
            path: path.into(),
            line: line_no,
            message,
        })?;
        if seen.insert(record.entity_id.clone(), line_no).is_some() {
            return Err(Error::DuplicateEntity {
                path: path.into(),
                line: line_no,
                entity_id: record.entity_id,
            });
        }
        Ok(record)
    })?;
    EntityCorpus::new(records)
}

/// Reads a mentions file and resolves every gold label against `corpus`.
pub fn load_mentions(path: impl AsRef<Path>, corpus: &EntityCorpus) -> Result<Vec<MentionRecord>> {
    let path = path.as_ref();
    let mentions = read_lines(path, |line_no, line| {
        serde_json::from_str::<MentionRecord>(line).map_err(|e| Error::Malformed {
            path: path.into(),
            line: line_no,
            message: e.to_string(),
        })
    })?;
    validate_mentions(&mentions, corpus)?;
    Ok(mentions)
}

/// Checks mention text and gold labels.
pub fn validate_mentions(mentions: &[MentionRecord], corpus: &EntityCorpus) -> Result<()> {
    for m in mentions {
        if m.mention.trim().is_empty() {
            return Err(Error::EmptyMention {
                mention_id: m.mention_id.clone(),
            });
        }
        if !corpus.contains(&m.gold_entity_id) {
            return Err(Error::UnknownGoldEntity {
                mention_id: m.mention_id.clone(),
                gold_entity_id: m.gold_entity_id.clone(),
            });
        }
    }
    Ok(())
}

/// Writes records as line-delimited JSON.
pub fn write_jsonl<T: Serialize>(path: impl AsRef<Path>, records: &[T]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for record in records {
        let line = serde_json::to_string(record).expect("records serialize");
        writeln!(out, "{line}").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}
