//! Multi-view matching: view scores, best-view selection, the exhaustive
//! subset oracle, and the cached-vector index with exact top-k retrieval.
//!
//! Similarity is the dot product `g(m) · f(t, Q)`. Matching distance is its
//! negation, so every "closest view" or "closest entity" is an argmax of
//! score.

mod index;
mod oracle;
mod views;

use serde::{Deserialize, Serialize};

use crate::encoder::EncodedVector;
use crate::{Error, Result};

pub use index::{build_index, EntityIndex, IndexedEntity, IndexedView, INDEX_MAGIC};
pub use oracle::{optimal_subset_oracle, restricted_subset_oracle, OracleResult, ORACLE_MAX_BASIC};
pub use views::{View, ViewId, ViewSegment, ViewSet};

/// Dot-product similarity.
pub fn score(mention: &EncodedVector, view: &EncodedVector) -> Result<f64> {
    if mention.dim() != view.dim() {
        return Err(Error::DimensionMismatch {
            expected: mention.dim(),
            actual: view.dim(),
        });
    }
    Ok(mention.dot(&view.0))
}

/// Score against an `f32`-stored vector, accumulated in `f64`.
#[inline]
pub fn score_stored(mention: &[f64], view: &[f32]) -> f64 {
    mention.iter().zip(view).map(|(m, &v)| m * v as f64).sum()
}

/// Highest-scoring entry; equal scores resolve to the smaller view id.
pub fn best_view<I>(scores: I) -> Option<(ViewId, f64)>
where
    I: IntoIterator<Item = (ViewId, f64)>,
{
    scores.into_iter().fold(None, |best, (id, s)| match best {
        Some((best_id, best_s)) if s < best_s || (s == best_s && id > best_id) => best,
        _ => Some((id, s)),
    })
}

/// Best view of one indexed entity for a mention.
pub fn matching_score(mention: &[f64], entity: &IndexedEntity) -> Result<(ViewId, f64)> {
    best_view(
        entity
            .views
            .iter()
            .map(|v| (v.view_id, score_stored(mention, &v.vector))),
    )
    .ok_or_else(|| Error::NoViews(entity.entity_id.clone()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub entity_id: String,
    pub view_id: ViewId,
    pub score: f64,
}

/// Ranked candidates for one mention.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub mention_id: String,
    pub candidates: Vec<Candidate>,
}

impl RetrievalResult {
    /// 1-based rank of `entity_id`, if retrieved.
    pub fn rank_of(&self, entity_id: &str) -> Option<usize> {
        self.candidates
            .iter()
            .position(|c| c.entity_id == entity_id)
            .map(|p| p + 1)
    }
}

/// Ranking order: score descending, then entity id, then view id.
pub fn candidate_order(a: &Candidate, b: &Candidate) -> std::cmp::Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| a.entity_id.cmp(&b.entity_id))
        .then_with(|| a.view_id.cmp(&b.view_id))
}

/// Keeps the first `k` candidates under [`candidate_order`], sorted.
pub fn top_k(mut candidates: Vec<Candidate>, k: usize) -> Vec<Candidate> {
    if k == 0 {
        return Vec::new();
    }
    if candidates.len() > k {
        candidates.select_nth_unstable_by(k - 1, candidate_order);
        candidates.truncate(k);
    }
    candidates.sort_by(candidate_order);
    candidates
}
