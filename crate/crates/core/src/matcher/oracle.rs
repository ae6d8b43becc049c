//! Exhaustive search for the best subset of basic views. A test instrument:
//! it encodes all `2^k - 1` subsets and is capped at 12 basic views.

use super::{View, ViewSet};
use crate::encoder::{DualEncoder, EncodedVector};
use crate::{Error, Result};

pub const ORACLE_MAX_BASIC: usize = 12;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    /// Sentence indices of the winning subset, ascending.
    pub sentences: Vec<u32>,
    pub score: f64,
}

/// Best non-empty subset of basic views. Equal scores resolve to the
/// lexicographically smallest sentence set.
pub fn optimal_subset_oracle(
    mention: &EncodedVector,
    viewset: &ViewSet,
    encoder: &DualEncoder,
) -> Result<OracleResult> {
    restricted_subset_oracle(mention, viewset, encoder, usize::MAX)
}

/// [`optimal_subset_oracle`] over subsets of at most `max_size` basic views.
pub fn restricted_subset_oracle(
    mention: &EncodedVector,
    viewset: &ViewSet,
    encoder: &DualEncoder,
    max_size: usize,
) -> Result<OracleResult> {
    let basic = viewset.basic_views();
    if basic.len() > ORACLE_MAX_BASIC {
        return Err(Error::OracleLimit {
            basic: basic.len(),
            max: ORACLE_MAX_BASIC,
        });
    }
    if mention.dim() != encoder.dim() {
        return Err(Error::DimensionMismatch {
            expected: encoder.dim(),
            actual: mention.dim(),
        });
    }
    let mut best: Option<OracleResult> = None;
    for mask in 1u32..(1 << basic.len()) {
        if mask.count_ones() as usize > max_size {
            continue;
        }
        let segments = basic
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .flat_map(|(_, v)| v.segments.iter().cloned())
            .collect();
        let subset = View::new(0, segments);
        let score = mention.dot(&encoder.encode_view(viewset, &subset).0);
        let sentences = subset.sentence_indices();
        let better = match &best {
            None => true,
            Some(b) => score > b.score || (score == b.score && sentences < b.sentences),
        };
        if better {
            best = Some(OracleResult { sentences, score });
        }
    }
    Ok(best.expect("view sets hold at least one basic view"))
}
