use crate::truncation::{TokenId, TokenSequence};

use super::{BackendError, Tokenizer};

/// Ids below this are reserved for special tokens.
pub const RESERVED_IDS: u32 = 3;
pub const CLS_ID: TokenId = 0;
pub const SEP_ID: TokenId = 1;

pub(crate) fn fnv1a(bytes: &[u8], key: u64) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64 ^ key.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// SplitMix64 finalizer; decorrelates hashed ids.
pub(crate) fn mix(mut x: u64) -> u64 {
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Word-level tokenizer: lowercases, splits on anything that is not
/// alphanumeric or an apostrophe, and hashes each word into the vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashTokenizer {
    vocab_size: u32,
}

impl HashTokenizer {
    pub fn new(vocab_size: usize) -> Result<Self, BackendError> {
        if vocab_size <= RESERVED_IDS as usize || vocab_size > u32::MAX as usize {
            return Err(BackendError::Config(format!("vocab_size {vocab_size} out of range")));
        }
        Ok(Self { vocab_size: vocab_size as u32 })
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size as usize
    }

    pub fn word_id(&self, word: &str) -> TokenId {
        let span = u64::from(self.vocab_size - RESERVED_IDS);
        (fnv1a(word.to_lowercase().as_bytes(), 0) % span) as TokenId + RESERVED_IDS
    }

    pub fn words(text: &str) -> impl Iterator<Item = &str> {
        text.split(|c: char| !(c.is_alphanumeric() || c == '\'')).filter(|w| !w.is_empty())
    }
}

impl Tokenizer for HashTokenizer {
    fn tokenize(&self, text: &str) -> Result<TokenSequence, BackendError> {
        Ok(TokenSequence(Self::words(text).map(|w| self.word_id(w)).collect()))
    }
}
