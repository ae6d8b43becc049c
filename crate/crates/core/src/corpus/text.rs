//! Tokenization, vocabulary and sentence segmentation.
//!
//! Text is lowercased and split on whitespace; every character that is
//! neither alphanumeric nor whitespace becomes a token of its own. Sentences
//! end at `.`, `!` or `?` when the terminator is followed by whitespace or the
//! end of the text.

use std::collections::HashMap;
use std::ops::Deref;

use serde::{Deserialize, Serialize};

pub type TokenId = u32;

pub const CLS: TokenId = 0;
pub const SEP: TokenId = 1;
pub const ENT: TokenId = 2;
pub const MENTION_START: TokenId = 3;
pub const MENTION_END: TokenId = 4;
pub const UNK: TokenId = 5;
pub const PAD: TokenId = 6;

/// Surface forms of the reserved ids, in id order.
pub const RESERVED: [&str; 7] = [
    "[CLS]", "[SEP]", "[ENT]", "[M_s]", "[M_e]", "[UNK]", "[PAD]",
];

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenSequence(pub Vec<TokenId>);

impl TokenSequence {
    pub fn new(ids: Vec<TokenId>) -> Self {
        Self(ids)
    }

    pub fn into_inner(self) -> Vec<TokenId> {
        self.0
    }
}

impl Deref for TokenSequence {
    type Target = [TokenId];

    fn deref(&self) -> &[TokenId] {
        &self.0
    }
}

impl From<Vec<TokenId>> for TokenSequence {
    fn from(ids: Vec<TokenId>) -> Self {
        Self(ids)
    }
}

/// String ↔ id map. Ids 0..7 are the reserved template tokens; every other
/// id maps to exactly one word.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<String>,
    ids: HashMap<String, TokenId>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        Self::new()
    }
}

impl Vocabulary {
    pub fn new() -> Self {
        Self {
            words: RESERVED.iter().map(|s| s.to_string()).collect(),
            ids: HashMap::new(),
        }
    }

    /// Rebuilds a vocabulary from its non-reserved words in id order.
    pub fn from_words<I, S>(words: I) -> crate::Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut vocab = Self::new();
        for word in words {
            let word = word.into();
            if word.is_empty() || vocab.ids.contains_key(&word) {
                return Err(crate::Error::format(
                    "vocabulary",
                    format!("empty or repeated word {word:?}"),
                ));
            }
            vocab.push(word);
        }
        Ok(vocab)
    }

    fn push(&mut self, word: String) -> TokenId {
        let id = self.words.len() as TokenId;
        self.ids.insert(word.clone(), id);
        self.words.push(word);
        id
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn id(&self, word: &str) -> Option<TokenId> {
        self.ids.get(word).copied()
    }

    pub fn word(&self, id: TokenId) -> Option<&str> {
        self.words.get(id as usize).map(String::as_str)
    }

    /// Non-reserved words in id order.
    pub fn words(&self) -> &[String] {
        &self.words[RESERVED.len()..]
    }

    /// Tokenizes `text`, adding unseen words.
    pub fn tokenize(&mut self, text: &str) -> TokenSequence {
        let ids = split_words(text)
            .map(|w| match self.ids.get(&w) {
                Some(&id) => id,
                None => self.push(w),
            })
            .collect();
        TokenSequence(ids)
    }

    /// Tokenizes `text` against the frozen vocabulary; unseen words become [`UNK`].
    pub fn tokenize_frozen(&self, text: &str) -> TokenSequence {
        let ids = split_words(text)
            .map(|w| self.ids.get(&w).copied().unwrap_or(UNK))
            .collect();
        TokenSequence(ids)
    }

    /// Dispatches to [`Self::tokenize`] or [`Self::tokenize_frozen`].
    pub fn tokenize_with(&mut self, text: &str, frozen: bool) -> TokenSequence {
        if frozen {
            self.tokenize_frozen(text)
        } else {
            self.tokenize(text)
        }
    }
}

/// Lowercased word pieces of `text`.
pub fn split_words(text: &str) -> impl Iterator<Item = String> + '_ {
    let mut out = Vec::new();
    let mut current = String::new();
    for ch in text.chars() {
        if ch.is_whitespace() {
            if !current.is_empty() {
                out.push(std::mem::take(&mut current));
            }
        } else if ch.is_alphanumeric() {
            current.extend(ch.to_lowercase());
        } else {
            if !current.is_empty() {
                out.push(std::mem::take(&mut current));
            }
            out.push(ch.to_lowercase().collect());
        }
    }
    if !current.is_empty() {
        out.push(current);
    }
    out.into_iter()
}

/// One sentence of a description.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    /// 0-based position in the description.
    pub index: usize,
    pub tokens: TokenSequence,
    /// True for the first sentence and for sentences that follow a line break.
    pub starts_paragraph: bool,
}

pub type SentenceList = Vec<Sentence>;

/// Byte spans of the sentences of `text`, plus whether each one opens a paragraph.
pub fn sentence_spans(text: &str) -> Vec<(&str, bool)> {
    let mut spans = Vec::new();
    let mut start = 0;
    let mut chars = text.char_indices().peekable();
    while let Some((i, ch)) = chars.next() {
        if matches!(ch, '.' | '!' | '?') {
            let at_boundary = chars.peek().is_none_or(|&(_, next)| next.is_whitespace());
            if at_boundary {
                let end = i + ch.len_utf8();
                push_span(&mut spans, &text[start..end]);
                start = end;
            }
        }
    }
    push_span(&mut spans, &text[start..]);
    spans
}

fn push_span<'a>(spans: &mut Vec<(&'a str, bool)>, chunk: &'a str) {
    let body = chunk.trim_start();
    if body.trim_end().is_empty() {
        return;
    }
    let lead = &chunk[..chunk.len() - body.len()];
    let starts_paragraph = spans.is_empty() || lead.contains('\n');
    spans.push((body.trim_end(), starts_paragraph));
}

/// Splits a description into tokenized sentences, growing `vocab` as needed.
pub fn segment_sentences(description: &str, vocab: &mut Vocabulary) -> SentenceList {
    sentence_spans(description)
        .into_iter()
        .enumerate()
        .map(|(index, (text, starts_paragraph))| Sentence {
            index,
            tokens: vocab.tokenize(text),
            starts_paragraph,
        })
        .collect()
}

/// Like [`segment_sentences`] but against a frozen vocabulary.
pub fn segment_sentences_frozen(description: &str, vocab: &Vocabulary) -> SentenceList {
    sentence_spans(description)
        .into_iter()
        .enumerate()
        .map(|(index, (text, starts_paragraph))| Sentence {
            index,
            tokens: vocab.tokenize_frozen(text),
            starts_paragraph,
        })
        .collect()
}
