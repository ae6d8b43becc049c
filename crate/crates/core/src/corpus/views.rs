use serde::{Deserialize, Serialize};

use super::text::{segment_sentences, segment_sentences_frozen, SentenceList};
use super::{EntityRecord, TokenSequence, Vocabulary};
use crate::matcher::{View, ViewSegment, ViewSet};
use crate::{Error, Result};

/// Which sentences become basic views.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ViewPolicy {
    /// One view per sentence.
    #[default]
    PerSentence,
    /// The opening sentence of each of the first `k` paragraphs.
    FirstParagraphs(usize),
}

impl std::str::FromStr for ViewPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "per-sentence" {
            return Ok(Self::PerSentence);
        }
        let k = s
            .strip_prefix("first-")
            .and_then(|rest| rest.strip_suffix("-paragraphs"))
            .and_then(|k| k.parse().ok())
            .filter(|&k: &usize| k >= 1)
            .ok_or_else(|| Error::Config(format!("unknown view policy `{s}`")))?;
        Ok(Self::FirstParagraphs(k))
    }
}

impl std::fmt::Display for ViewPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::PerSentence => f.write_str("per-sentence"),
            Self::FirstParagraphs(k) => write!(f, "first-{k}-paragraphs"),
        }
    }
}

fn truncated(tokens: &TokenSequence, max: usize) -> TokenSequence {
    TokenSequence(tokens.iter().take(max).copied().collect())
}

fn assemble(
    entity: &EntityRecord,
    title_tokens: TokenSequence,
    sentences: SentenceList,
    max_view_tokens: usize,
    policy: ViewPolicy,
) -> Result<ViewSet> {
    if max_view_tokens == 0 {
        return Err(Error::InvalidArgument(
            "max_view_tokens must be >= 1".into(),
        ));
    }
    let sentence_count = sentences.len();
    let chosen: Vec<_> = match policy {
        ViewPolicy::PerSentence => sentences,
        ViewPolicy::FirstParagraphs(k) => sentences
            .into_iter()
            .filter(|s| s.starts_paragraph)
            .take(k)
            .collect(),
    };
    let mut views: Vec<View> = chosen
        .iter()
        .enumerate()
        .map(|(i, s)| {
            View::new(
                i as u32,
                vec![ViewSegment {
                    sentence: s.index as u32,
                    tokens: truncated(&s.tokens, max_view_tokens),
                }],
            )
        })
        .collect();
    if views.is_empty() {
        views.push(View::empty(0));
    }
    Ok(ViewSet {
        entity_id: entity.entity_id.clone(),
        title_tokens,
        sentence_count,
        basic_count: views.len(),
        views,
    })
}

/// Builds the basic views of `entity`, each sentence truncated to its first
/// `max_view_tokens` tokens. An empty description yields one empty view.
pub fn build_views(
    entity: &EntityRecord,
    vocab: &mut Vocabulary,
    max_view_tokens: usize,
    policy: ViewPolicy,
) -> Result<ViewSet> {
    let title = vocab.tokenize(&entity.title);
    let sentences = segment_sentences(&entity.description, vocab);
    assemble(entity, title, sentences, max_view_tokens, policy)
}

/// [`build_views`] against a frozen vocabulary.
pub fn build_views_frozen(
    entity: &EntityRecord,
    vocab: &Vocabulary,
    max_view_tokens: usize,
    policy: ViewPolicy,
) -> Result<ViewSet> {
    let title = vocab.tokenize_frozen(&entity.title);
    let sentences = segment_sentences_frozen(&entity.description, vocab);
    assemble(entity, title, sentences, max_view_tokens, policy)
}

/// A view set holding a single view over the whole description (every
/// sentence truncated as in [`build_views`]). This is the one-vector
/// dual-encoder configuration.
pub fn single_view(
    entity: &EntityRecord,
    vocab: &Vocabulary,
    max_view_tokens: usize,
) -> Result<ViewSet> {
    let mut set = build_views_frozen(entity, vocab, max_view_tokens, ViewPolicy::PerSentence)?;
    let segments = set.views.drain(..).flat_map(|v| v.segments).collect();
    set.views = vec![View::new(0, segments)];
    set.basic_count = 1;
    Ok(set)
}
