use std::collections::BTreeMap;

use crate::corpus::MentionRecord;
use crate::encoder::DualEncoder;
use crate::matcher::EntityIndex;
use crate::{Error, Result};

/// Top `n_hard` non-gold entities per mention, in rank order.
pub fn mine_hard_negatives(
    index: &EntityIndex,
    mentions: &[MentionRecord],
    encoder: &DualEncoder,
    n_hard: usize,
    max_ctx_tokens: usize,
) -> Result<BTreeMap<String, Vec<String>>> {
    if n_hard == 0 {
        return Ok(BTreeMap::new());
    }
    if n_hard >= index.len() {
        return Err(Error::InvalidArgument(format!(
            "{n_hard} hard negatives requested from an index of {} entities",
            index.len()
        )));
    }
    let ranked = index.retrieve_mentions(encoder, mentions, max_ctx_tokens, n_hard + 1)?;
    Ok(ranked
        .into_iter()
        .zip(mentions)
        .map(|(r, m)| {
            let negatives = r
                .candidates
                .into_iter()
                .filter(|c| c.entity_id != m.gold_entity_id)
                .take(n_hard)
                .map(|c| c.entity_id)
                .collect();
            (r.mention_id, negatives)
        })
        .collect())
}
