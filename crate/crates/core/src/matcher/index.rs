use std::collections::HashMap;
use std::path::Path;

use rayon::prelude::*;

use super::{matching_score, top_k, Candidate, RetrievalResult, ViewId, ViewSet};
use crate::corpus::{EntityCorpus, MentionRecord};
use crate::encoder::{ByteReader, DualEncoder, EncodedVector, Fingerprint};
use crate::{Error, Result};

pub const INDEX_MAGIC: &[u8; 5] = b"MVIX1";

#[derive(Debug, Clone, PartialEq)]
pub struct IndexedView {
    pub view_id: ViewId,
    pub sentences: Vec<u32>,
    pub vector: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndexedEntity {
    pub entity_id: String,
    pub views: Vec<IndexedView>,
}

/// Cached view vectors for every entity, tagged with the encoder that
/// produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct EntityIndex {
    pub fingerprint: Fingerprint,
    pub dim: usize,
    pub entities: Vec<IndexedEntity>,
}

/// Encodes every view of every corpus entity once.
pub fn build_index(
    corpus: &EntityCorpus,
    viewsets: &[ViewSet],
    encoder: &DualEncoder,
) -> Result<EntityIndex> {
    let by_id: HashMap<&str, &ViewSet> =
        viewsets.iter().map(|v| (v.entity_id.as_str(), v)).collect();
    let ordered = corpus
        .iter()
        .map(|e| {
            by_id
                .get(e.entity_id.as_str())
                .copied()
                .ok_or_else(|| Error::MissingViewSet(e.entity_id.clone()))
        })
        .collect::<Result<Vec<_>>>()?;
    let entities = ordered
        .par_iter()
        .map(|vs| IndexedEntity {
            entity_id: vs.entity_id.clone(),
            views: vs
                .views
                .iter()
                .map(|v| IndexedView {
                    view_id: v.view_id,
                    sentences: v.sentence_indices(),
                    vector: encoder.encode_view(vs, v).to_f32(),
                })
                .collect(),
        })
        .collect();
    Ok(EntityIndex {
        fingerprint: encoder.fingerprint(),
        dim: encoder.dim(),
        entities,
    })
}

impl EntityIndex {
    pub fn len(&self) -> usize {
        self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    pub fn vector_count(&self) -> usize {
        self.entities.iter().map(|e| e.views.len()).sum()
    }

    pub fn mean_views(&self) -> f64 {
        if self.entities.is_empty() {
            return 0.0;
        }
        self.vector_count() as f64 / self.entities.len() as f64
    }

    /// Fails unless `encoder` is the one this index was built with.
    pub fn check_encoder(&self, encoder: &DualEncoder) -> Result<()> {
        let actual = encoder.fingerprint();
        if actual != self.fingerprint {
            return Err(Error::StaleFingerprint {
                expected: self.fingerprint.to_string(),
                actual: actual.to_string(),
            });
        }
        Ok(())
    }

    fn scan(
        &self,
        entities: &[IndexedEntity],
        mention: &[f64],
        k: usize,
    ) -> Result<Vec<Candidate>> {
        let scored = entities
            .iter()
            .map(|e| {
                matching_score(mention, e).map(|(view_id, score)| Candidate {
                    entity_id: e.entity_id.clone(),
                    view_id,
                    score,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(top_k(scored, k))
    }

    fn check_query(&self, mention: &EncodedVector, k: usize) -> Result<()> {
        if self.entities.is_empty() {
            return Err(Error::EmptyIndex);
        }
        if k == 0 {
            return Err(Error::InvalidArgument("k must be >= 1".into()));
        }
        if mention.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: mention.dim(),
            });
        }
        Ok(())
    }

    /// Exact top-`k` entities by best-view score.
    pub fn retrieve(&self, mention: &EncodedVector, k: usize) -> Result<Vec<Candidate>> {
        self.check_query(mention, k)?;
        self.scan(&self.entities, &mention.0, k)
    }

    /// [`Self::retrieve`] split across worker threads; returns the same ranking.
    pub fn retrieve_par(&self, mention: &EncodedVector, k: usize) -> Result<Vec<Candidate>> {
        self.check_query(mention, k)?;
        let chunk = self
            .entities
            .len()
            .div_ceil(rayon::current_num_threads().max(1))
            .max(64);
        let partial = self
            .entities
            .par_chunks(chunk)
            .map(|part| self.scan(part, &mention.0, k))
            .collect::<Result<Vec<_>>>()?;
        Ok(top_k(partial.into_iter().flatten().collect(), k))
    }

    /// Encodes and ranks each mention. Checks the encoder fingerprint first.
    pub fn retrieve_mentions(
        &self,
        encoder: &DualEncoder,
        mentions: &[MentionRecord],
        max_ctx_tokens: usize,
        k: usize,
    ) -> Result<Vec<RetrievalResult>> {
        self.check_encoder(encoder)?;
        mentions
            .par_iter()
            .map(|m| {
                let vec = encoder.encode_mention(m, max_ctx_tokens)?;
                Ok(RetrievalResult {
                    mention_id: m.mention_id.clone(),
                    candidates: self.retrieve(&vec, k)?,
                })
            })
            .collect()
    }

    pub fn entity(&self, entity_id: &str) -> Option<&IndexedEntity> {
        self.entities.iter().find(|e| e.entity_id == entity_id)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        let u32le = |out: &mut Vec<u8>, x: usize| out.extend_from_slice(&(x as u32).to_le_bytes());
        out.extend_from_slice(INDEX_MAGIC);
        out.extend_from_slice(&self.fingerprint.0);
        u32le(&mut out, self.dim);
        u32le(&mut out, self.entities.len());
        for e in &self.entities {
            u32le(&mut out, e.entity_id.len());
            out.extend_from_slice(e.entity_id.as_bytes());
            u32le(&mut out, e.views.len());
            for v in &e.views {
                u32le(&mut out, v.view_id as usize);
                u32le(&mut out, v.sentences.len());
                for &s in &v.sentences {
                    u32le(&mut out, s as usize);
                }
                for &x in &v.vector {
                    out.extend_from_slice(&x.to_le_bytes());
                }
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes, "index");
        if r.take(INDEX_MAGIC.len())? != INDEX_MAGIC {
            return Err(Error::format("index", "bad magic"));
        }
        let fingerprint = Fingerprint(r.take(32)?.try_into().unwrap());
        let dim = r.u32()? as usize;
        let n = r.u32()? as usize;
        let mut entities = Vec::with_capacity(n.min(1 << 20));
        for _ in 0..n {
            let entity_id = r.string()?;
            let n_views = r.u32()? as usize;
            let mut views = Vec::with_capacity(n_views.min(1 << 16));
            for _ in 0..n_views {
                let view_id = r.u32()?;
                let n_sent = r.u32()? as usize;
                let sentences = (0..n_sent).map(|_| r.u32()).collect::<Result<_>>()?;
                let vector = (0..dim).map(|_| r.f32()).collect::<Result<_>>()?;
                views.push(IndexedView {
                    view_id,
                    sentences,
                    vector,
                });
            }
            entities.push(IndexedEntity { entity_id, views });
        }
        r.finish()?;
        Ok(Self {
            fingerprint,
            dim,
            entities,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}
