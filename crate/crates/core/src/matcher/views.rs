use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::corpus::{TokenId, TokenSequence};

pub type ViewId = u32;

/// Tokens contributed by one description sentence, already truncated.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViewSegment {
    pub sentence: u32,
    pub tokens: TokenSequence,
}

/// A subset of an entity's sentences.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct View {
    pub view_id: ViewId,
    /// Member sentences in ascending sentence order.
    pub segments: Vec<ViewSegment>,
}

impl View {
    pub fn new(view_id: ViewId, mut segments: Vec<ViewSegment>) -> Self {
        segments.sort_by_key(|s| s.sentence);
        segments.dedup_by_key(|s| s.sentence);
        Self { view_id, segments }
    }

    pub fn empty(view_id: ViewId) -> Self {
        Self {
            view_id,
            segments: Vec::new(),
        }
    }

    pub fn sentence_indices(&self) -> Vec<u32> {
        self.segments.iter().map(|s| s.sentence).collect()
    }

    /// Member sentence tokens concatenated in sentence order.
    pub fn tokens(&self) -> TokenSequence {
        TokenSequence(
            self.segments
                .iter()
                .flat_map(|s| s.tokens.iter().copied())
                .collect(),
        )
    }

    pub fn token_ids(&self) -> impl Iterator<Item = TokenId> + '_ {
        self.segments.iter().flat_map(|s| s.tokens.iter().copied())
    }

    pub fn token_count(&self) -> usize {
        self.segments.iter().map(|s| s.tokens.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }
}

/// All views of one entity. `views[..basic_count]` are the basic views in
/// sentence order; any later views were produced by merging.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViewSet {
    pub entity_id: String,
    pub title_tokens: TokenSequence,
    /// Number of sentences in the full description.
    pub sentence_count: usize,
    pub basic_count: usize,
    pub views: Vec<View>,
}

impl ViewSet {
    pub fn len(&self) -> usize {
        self.views.len()
    }

    pub fn is_empty(&self) -> bool {
        self.views.is_empty()
    }

    pub fn basic_views(&self) -> &[View] {
        &self.views[..self.basic_count]
    }

    pub fn next_view_id(&self) -> ViewId {
        self.views.iter().map(|v| v.view_id + 1).max().unwrap_or(0)
    }

    pub fn contains_sentences(&self, sentences: &[u32]) -> bool {
        self.views.iter().any(|v| {
            v.segments
                .iter()
                .map(|s| s.sentence)
                .eq(sentences.iter().copied())
        })
    }

    pub fn view(&self, view_id: ViewId) -> Option<&View> {
        self.views.iter().find(|v| v.view_id == view_id)
    }

    /// Checks the structural invariants: unique view ids, unique sentence
    /// sets, and single-sentence basic views.
    pub fn validate(&self) -> crate::Result<()> {
        let bad = |msg: String| Err(crate::Error::format("view set", msg));
        if self.views.is_empty() {
            return bad(format!("entity `{}` has no views", self.entity_id));
        }
        if self.basic_count == 0 || self.basic_count > self.views.len() {
            return bad(format!("entity `{}`: bad basic_count", self.entity_id));
        }
        let mut ids = HashSet::new();
        let mut sets = HashSet::new();
        for view in &self.views {
            if !ids.insert(view.view_id) {
                return bad(format!(
                    "entity `{}`: repeated view id {}",
                    self.entity_id, view.view_id
                ));
            }
            if !sets.insert(view.sentence_indices()) {
                return bad(format!(
                    "entity `{}`: repeated sentence set",
                    self.entity_id
                ));
            }
        }
        Ok(())
    }
}
