use crate::truncation::{TokenId, TokenSequence};

use super::hashing::{mix, HashTokenizer};
use super::{BackendError, Encoder, EncoderBackend, Tokenizer};

pub const DEFAULT_DIM: usize = 1024;
const VOCAB: usize = 1 << 24;

/// Frozen encoder: an L2-normalized signed-hash projection of the bag of
/// tokens. Only the classifier head on top of it is trained.
#[derive(Debug, Clone)]
pub struct ToyLinear {
    dim: usize,
    projection_seed: u64,
}

impl ToyLinear {
    pub fn new(dim: usize, projection_seed: u64) -> Result<Self, BackendError> {
        if dim == 0 {
            return Err(BackendError::Config("toy-linear dim must be positive".into()));
        }
        Ok(Self { dim, projection_seed })
    }

    pub fn encoder(&self) -> ToyLinearEncoder {
        ToyLinearEncoder {
            tokenizer: HashTokenizer::new(VOCAB).expect("valid vocab"),
            dim: self.dim,
            key: self.projection_seed,
        }
    }
}

impl EncoderBackend for ToyLinear {
    fn id(&self) -> String {
        format!("toy-linear-d{}-p{}", self.dim, self.projection_seed)
    }

    fn n_special(&self) -> usize {
        0
    }

    fn build(&self, _seed: u64) -> Result<Box<dyn Encoder>, BackendError> {
        Ok(Box::new(self.encoder()))
    }
}

#[derive(Debug, Clone)]
pub struct ToyLinearEncoder {
    tokenizer: HashTokenizer,
    dim: usize,
    key: u64,
}

impl ToyLinearEncoder {
    /// Feature slot and sign a token projects onto.
    pub fn projection(&self, token: TokenId) -> (usize, f64) {
        let h = mix(u64::from(token) ^ mix(self.key));
        let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
        ((h % self.dim as u64) as usize, sign)
    }

    /// Feature slot of a single word.
    pub fn word_slot(&self, word: &str) -> usize {
        self.projection(self.tokenizer.word_id(word)).0
    }
}

impl Tokenizer for ToyLinearEncoder {
    fn tokenize(&self, text: &str) -> Result<TokenSequence, BackendError> {
        self.tokenizer.tokenize(text)
    }
}

impl Encoder for ToyLinearEncoder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn encode(&self, tokens: &[TokenId]) -> Result<Vec<f64>, BackendError> {
        let mut v = vec![0.0; self.dim];
        for &t in tokens {
            let (slot, sign) = self.projection(t);
            v[slot] += sign;
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_norm_and_frozen() {
        let backend = ToyLinear::new(64, 3).unwrap();
        let enc = backend.build(1).unwrap();
        assert!(!enc.is_trainable());
        let toks = enc.tokenize("a b c a").unwrap();
        let v = enc.encode(toks.as_slice()).unwrap();
        assert_eq!(v.len(), 64);
        assert!((v.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-12);
        let other = backend.build(99).unwrap();
        assert_eq!(other.encode(toks.as_slice()).unwrap(), v);
        assert!(enc.encode(&[]).unwrap().iter().all(|&x| x == 0.0));
    }
}
