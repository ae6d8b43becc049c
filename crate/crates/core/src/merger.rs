//! Iterative view merging.
//!
//! Each round ranks every unordered pair of current views by the Euclidean
//! distance between their entity encodings, unites the first `top_k_pairs`
//! pairs whose union is not already a view, and appends the unions. Rounds
//! stop at `max_iters`, at `max_views`, or when no new union exists.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::encoder::{DualEncoder, EncodedVector};
use crate::matcher::{View, ViewId, ViewSegment, ViewSet};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum MergeStrategy {
    /// Most distant pairs first.
    #[default]
    Distant,
    /// Closest pairs first.
    Close,
}

impl FromStr for MergeStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "distant" => Ok(Self::Distant),
            "close" => Ok(Self::Close),
            _ => Err(Error::Config(format!("unknown merge strategy `{s}`"))),
        }
    }
}

impl fmt::Display for MergeStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Distant => "distant",
            Self::Close => "close",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergeConfig {
    pub top_k_pairs: usize,
    /// Cap on views per entity; `None` means twice the basic view count.
    pub max_views: Option<usize>,
    pub max_iters: usize,
    pub strategy: MergeStrategy,
}

impl Default for MergeConfig {
    fn default() -> Self {
        Self {
            top_k_pairs: 1,
            max_views: None,
            max_iters: 5,
            strategy: MergeStrategy::Distant,
        }
    }
}

impl MergeConfig {
    pub fn view_cap(&self, basic_count: usize) -> usize {
        self.max_views.unwrap_or(2 * basic_count).max(basic_count)
    }

    pub fn validate(&self) -> Result<()> {
        if self.top_k_pairs == 0 {
            return Err(Error::Config("top_k_pairs must be >= 1".into()));
        }
        Ok(())
    }
}

/// `||f(t, Q1) - f(t, Q2)||`
pub fn view_pair_distance(encoder: &DualEncoder, title: &[u32], a: &View, b: &View) -> f64 {
    euclidean(
        &encoder.encode_entity(title, a),
        &encoder.encode_entity(title, b),
    )
}

pub fn euclidean(a: &EncodedVector, b: &EncodedVector) -> f64 {
    a.0.iter()
        .zip(&b.0)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Union of the two views' sentences, tokens rebuilt in sentence order.
pub fn merge_views(a: &View, b: &View, view_id: ViewId) -> View {
    let mut segments: Vec<ViewSegment> = Vec::with_capacity(a.segments.len() + b.segments.len());
    let (mut i, mut j) = (0, 0);
    while i < a.segments.len() || j < b.segments.len() {
        let take_a = match (a.segments.get(i), b.segments.get(j)) {
            (Some(x), Some(y)) if x.sentence == y.sentence => {
                j += 1;
                true
            }
            (Some(x), Some(y)) => x.sentence < y.sentence,
            (Some(_), None) => true,
            (None, _) => false,
        };
        if take_a {
            segments.push(a.segments[i].clone());
            i += 1;
        } else {
            segments.push(b.segments[j].clone());
            j += 1;
        }
    }
    View { view_id, segments }
}

/// Per-round view counts recorded by [`heuristic_search_traced`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MergeTrace {
    /// `counts[0]` is the input size; `counts[r]` the size after round `r`.
    pub counts: Vec<usize>,
}

pub fn heuristic_search(viewset: &ViewSet, encoder: &DualEncoder, config: &MergeConfig) -> ViewSet {
    heuristic_search_traced(viewset, encoder, config).0
}

pub fn heuristic_search_traced(
    viewset: &ViewSet,
    encoder: &DualEncoder,
    config: &MergeConfig,
) -> (ViewSet, MergeTrace) {
    let mut out = viewset.clone();
    let mut trace = MergeTrace {
        counts: vec![out.len()],
    };
    let cap = config.view_cap(out.basic_count);
    let mut vectors: Vec<EncodedVector> = out
        .views
        .iter()
        .map(|v| encoder.encode_view(&out, v))
        .collect();
    let mut next_id = out.next_view_id();

    for _ in 0..config.max_iters {
        if out.len() >= cap || out.len() < 2 {
            break;
        }
        let mut pairs = Vec::with_capacity(out.len() * (out.len() - 1) / 2);
        for i in 0..out.len() {
            for j in i + 1..out.len() {
                pairs.push((euclidean(&vectors[i], &vectors[j]), i, j));
            }
        }
        match config.strategy {
            MergeStrategy::Distant => {
                pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then((a.1, a.2).cmp(&(b.1, b.2))))
            }
            MergeStrategy::Close => {
                pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then((a.1, a.2).cmp(&(b.1, b.2))))
            }
        }
        let mut merged = 0;
        for (_, i, j) in pairs {
            if merged == config.top_k_pairs || out.len() >= cap {
                break;
            }
            let view = merge_views(&out.views[i], &out.views[j], next_id);
            if out.contains_sentences(&view.sentence_indices()) {
                continue;
            }
            vectors.push(encoder.encode_view(&out, &view));
            out.views.push(view);
            next_id += 1;
            merged += 1;
        }
        if merged == 0 {
            break;
        }
        trace.counts.push(out.len());
    }
    (out, trace)
}
