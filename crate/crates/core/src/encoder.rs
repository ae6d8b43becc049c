//! Dual encoder over mean-pooled token embeddings.
//!
//! Both sides use the same architecture with independent parameters: the
//! template sequence is mapped to token embeddings, averaged, and multiplied
//! by a square projection matrix. The entity side reads
//! `[CLS] title [ENT] view [SEP]`; the mention side reads
//! `[CLS] left [M_s] mention [M_e] right [SEP]`.
//!
//! Parameters live in `f64`; checkpoints store them as little-endian `f32`.

use std::fmt;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::corpus::{
    MentionRecord, TokenId, Vocabulary, CLS, ENT, MENTION_END, MENTION_START, SEP, UNK,
};
use crate::matcher::{View, ViewSet};
use crate::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 6] = b"MUVER1";

/// Number of template tokens around a mention.
pub const MENTION_TEMPLATE_TOKENS: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct EncodedVector(pub Vec<f64>);

impl EncodedVector {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dot(&self, other: &[f64]) -> f64 {
        dot(&self.0, other)
    }

    pub fn norm(&self) -> f64 {
        dot(&self.0, &self.0).sqrt()
    }

    /// Unit-length copy; the zero vector is returned unchanged.
    pub fn normalized(&self) -> Self {
        let n = self.norm();
        if n == 0.0 {
            return self.clone();
        }
        Self(self.0.iter().map(|x| x / n).collect())
    }

    /// Rounds every entry through `f32`, the storage precision of indexes.
    pub fn to_f32(&self) -> Vec<f32> {
        self.0.iter().map(|&x| x as f32).collect()
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Token embeddings (`vocab_size × dim`) and projection (`dim × dim`), both row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    pub dim: usize,
    pub vocab_size: usize,
    pub embeddings: Vec<f64>,
    pub projection: Vec<f64>,
}

impl EncoderParams {
    fn random(vocab_size: usize, dim: usize, rng: &mut ChaCha8Rng) -> Self {
        let embeddings = (0..vocab_size * dim)
            .map(|_| rng.gen_range(-0.1..=0.1))
            .collect();
        let projection = (0..dim * dim)
            .map(|i| {
                let noise = rng.gen_range(-0.01..=0.01);
                if i / dim == i % dim {
                    1.0 + noise
                } else {
                    noise
                }
            })
            .collect();
        Self {
            dim,
            vocab_size,
            embeddings,
            projection,
        }
    }

    pub fn embedding(&self, token: TokenId) -> &[f64] {
        let row = self.row_of(token);
        &self.embeddings[row * self.dim..(row + 1) * self.dim]
    }

    /// Ids outside the vocabulary read the `[UNK]` row.
    pub fn row_of(&self, token: TokenId) -> usize {
        let t = token as usize;
        if t < self.vocab_size {
            t
        } else {
            UNK as usize
        }
    }

    /// Mean of the token embeddings.
    pub fn pool(&self, tokens: &[TokenId]) -> Vec<f64> {
        let mut acc = vec![0.0; self.dim];
        for &t in tokens {
            for (a, e) in acc.iter_mut().zip(self.embedding(t)) {
                *a += e;
            }
        }
        let n = tokens.len().max(1) as f64;
        acc.iter_mut().for_each(|a| *a /= n);
        acc
    }

    pub fn project(&self, pooled: &[f64]) -> Vec<f64> {
        self.projection
            .chunks_exact(self.dim)
            .map(|row| dot(row, pooled))
            .collect()
    }

    pub fn encode_tokens(&self, tokens: &[TokenId]) -> EncodedVector {
        EncodedVector(self.project(&self.pool(tokens)))
    }

    pub fn is_finite(&self) -> bool {
        self.embeddings
            .iter()
            .chain(&self.projection)
            .all(|x| x.is_finite())
    }
}

/// Short content hash identifying one set of encoder parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Fingerprint(pub [u8; 32]);

impl fmt::Display for Fingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.0[..8] {
            write!(f, "{b:02x}")?;
        }
        Ok(())
    }
}

/// How the two towers are initialized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
pub enum InitMode {
    /// Both towers start from the same draw and are then trained separately.
    #[default]
    Tied,
    /// Each tower gets its own draw.
    Independent,
}

impl std::str::FromStr for InitMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tied" => Ok(Self::Tied),
            "independent" => Ok(Self::Independent),
            _ => Err(Error::Config(format!("unknown init mode `{s}`"))),
        }
    }
}

impl fmt::Display for InitMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Tied => "tied",
            Self::Independent => "independent",
        })
    }
}

/// Entity encoder `f`, mention encoder `g`, and the vocabulary they share.
#[derive(Debug, Clone, PartialEq)]
pub struct DualEncoder {
    pub vocab: Vocabulary,
    pub entity: EncoderParams,
    pub mention: EncoderParams,
}

/// `[CLS] title [ENT] view [SEP]`
pub fn entity_sequence(title: &[TokenId], view: impl IntoIterator<Item = TokenId>) -> Vec<TokenId> {
    let mut seq = Vec::with_capacity(title.len() + 3);
    seq.push(CLS);
    seq.extend_from_slice(title);
    seq.push(ENT);
    seq.extend(view);
    seq.push(SEP);
    seq
}

/// `[CLS] left [M_s] mention [M_e] right [SEP]`, trimming context symmetrically
/// around the mention so the sequence fits in `max_ctx_tokens`.
pub fn mention_sequence(
    left: &[TokenId],
    mention: &[TokenId],
    right: &[TokenId],
    max_ctx_tokens: usize,
) -> Result<Vec<TokenId>> {
    let fixed = mention.len() + MENTION_TEMPLATE_TOKENS;
    if max_ctx_tokens < fixed {
        return Err(Error::ContextBudget {
            budget: max_ctx_tokens,
            mention_tokens: mention.len(),
        });
    }
    let budget = max_ctx_tokens - fixed;
    let mut left_take = budget / 2;
    let mut right_take = budget - left_take;
    if left.len() < left_take {
        right_take += left_take - left.len();
        left_take = left.len();
    }
    if right.len() < right_take {
        left_take = (left_take + right_take - right.len()).min(left.len());
        right_take = right.len();
    }
    let mut seq = Vec::with_capacity(fixed + left_take + right_take);
    seq.push(CLS);
    seq.extend_from_slice(&left[left.len() - left_take..]);
    seq.push(MENTION_START);
    seq.extend_from_slice(mention);
    seq.push(MENTION_END);
    seq.extend_from_slice(&right[..right_take]);
    seq.push(SEP);
    Ok(seq)
}

impl DualEncoder {
    /// Seeded initialization with independent draws per tower. Embeddings are
    /// uniform in [-0.1, 0.1]; each projection is the identity plus uniform
    /// noise in [-0.01, 0.01].
    pub fn init(vocab: Vocabulary, dim: usize, seed: u64) -> Result<Self> {
        Self::init_with(vocab, dim, seed, InitMode::Independent)
    }

    pub fn init_with(vocab: Vocabulary, dim: usize, seed: u64, mode: InitMode) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("encoder dim must be >= 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let entity = EncoderParams::random(vocab.len(), dim, &mut rng);
        let mention = match mode {
            InitMode::Tied => entity.clone(),
            InitMode::Independent => EncoderParams::random(vocab.len(), dim, &mut rng),
        };
        Ok(Self {
            vocab,
            entity,
            mention,
        })
    }

    pub fn dim(&self) -> usize {
        self.entity.dim
    }

    pub fn encode_entity(&self, title: &[TokenId], view: &View) -> EncodedVector {
        self.entity
            .encode_tokens(&entity_sequence(title, view.token_ids()))
    }

    pub fn encode_view(&self, viewset: &ViewSet, view: &View) -> EncodedVector {
        self.encode_entity(&viewset.title_tokens, view)
    }

    pub fn mention_tokens(
        &self,
        mention: &MentionRecord,
        max_ctx_tokens: usize,
    ) -> Result<Vec<TokenId>> {
        let left = self.vocab.tokenize_frozen(&mention.context_left);
        let surface = self.vocab.tokenize_frozen(&mention.mention);
        let right = self.vocab.tokenize_frozen(&mention.context_right);
        mention_sequence(&left, &surface, &right, max_ctx_tokens)
    }

    pub fn encode_mention(
        &self,
        mention: &MentionRecord,
        max_ctx_tokens: usize,
    ) -> Result<EncodedVector> {
        Ok(self
            .mention
            .encode_tokens(&self.mention_tokens(mention, max_ctx_tokens)?))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&(self.dim() as u32).to_le_bytes());
        out.extend_from_slice(&(self.vocab.len() as u32).to_le_bytes());
        for params in [&self.entity, &self.mention] {
            for &x in params.embeddings.iter().chain(&params.projection) {
                out.extend_from_slice(&(x as f32).to_le_bytes());
            }
        }
        out.extend_from_slice(&(self.vocab.words().len() as u32).to_le_bytes());
        for word in self.vocab.words() {
            out.extend_from_slice(&(word.len() as u32).to_le_bytes());
            out.extend_from_slice(word.as_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes, "checkpoint");
        if r.take(CHECKPOINT_MAGIC.len())? != CHECKPOINT_MAGIC {
            return Err(Error::format("checkpoint", "bad magic"));
        }
        let dim = r.u32()? as usize;
        let vocab_size = r.u32()? as usize;
        if dim == 0 {
            return Err(Error::format("checkpoint", "dim is zero"));
        }
        let read_params = |r: &mut ByteReader| -> Result<EncoderParams> {
            Ok(EncoderParams {
                dim,
                vocab_size,
                embeddings: r.f32s(vocab_size * dim)?,
                projection: r.f32s(dim * dim)?,
            })
        };
        let entity = read_params(&mut r)?;
        let mention = read_params(&mut r)?;
        let n_words = r.u32()? as usize;
        let mut words = Vec::with_capacity(n_words);
        for _ in 0..n_words {
            let len = r.u32()? as usize;
            let word = std::str::from_utf8(r.take(len)?)
                .map_err(|e| Error::format("checkpoint", e.to_string()))?;
            words.push(word.to_string());
        }
        r.finish()?;
        let vocab = Vocabulary::from_words(words)?;
        if vocab.len() != vocab_size {
            return Err(Error::format(
                "checkpoint",
                format!(
                    "vocabulary holds {} ids, header says {vocab_size}",
                    vocab.len()
                ),
            ));
        }
        if !entity.is_finite() || !mention.is_finite() {
            return Err(Error::format("checkpoint", "non-finite parameter"));
        }
        Ok(Self {
            vocab,
            entity,
            mention,
        })
    }

    pub fn fingerprint(&self) -> Fingerprint {
        Fingerprint(Sha256::digest(self.to_bytes()).into())
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

pub(crate) struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
    what: &'static str,
}

impl<'a> ByteReader<'a> {
    pub(crate) fn new(bytes: &'a [u8], what: &'static str) -> Self {
        Self {
            bytes,
            pos: 0,
            what,
        }
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&end| end <= self.bytes.len())
            .ok_or_else(|| Error::format(self.what, "truncated"))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub(crate) fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub(crate) fn f32s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(
            n.checked_mul(4)
                .ok_or_else(|| Error::format(self.what, "size overflow"))?,
        )?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect())
    }

    pub(crate) fn string(&mut self) -> Result<String> {
        let len = self.u32()? as usize;
        std::str::from_utf8(self.take(len)?)
            .map(str::to_string)
            .map_err(|e| Error::format(self.what, e.to_string()))
    }

    pub(crate) fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::format(self.what, "trailing bytes"));
        }
        Ok(())
    }
}
