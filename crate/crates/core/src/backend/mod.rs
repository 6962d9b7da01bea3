//! Encoder backends.
//!
//! An [`EncoderBackend`] names a model family and builds fresh, seeded
//! [`Encoder`] instances; the trainer builds one per trial so that trials
//! share no mutable state. An encoder tokenizes text (without special
//! tokens) and maps a truncated token sequence to the pooled
//! sequence-start representation fed to the classifier head.

mod external;
mod hashing;
mod toy_linear;
mod toy_transformer;

use std::io;

use serde::{Deserialize, Serialize};

use crate::truncation::{TokenId, TokenSequence};

pub use external::{ExternalBackend, ExternalEncoder};
pub use hashing::HashTokenizer;
pub use toy_linear::{ToyLinear, ToyLinearEncoder, DEFAULT_DIM as TOY_LINEAR_DEFAULT_DIM};
pub use toy_transformer::{ToyTransformer, ToyTransformerEncoder};

#[derive(Debug, thiserror::Error)]
pub enum BackendError {
    #[error("backend i/o: {0}")]
    Io(#[from] io::Error),
    #[error("backend protocol error: {0}")]
    Protocol(String),
    #[error("invalid backend configuration: {0}")]
    Config(String),
    #[error("sequence of {len} tokens exceeds the backend's {max} positions")]
    SequenceTooLong { len: usize, max: usize },
}

/// Combine a seed with a stream id into an independent seed.
pub(crate) fn mix_seed(seed: u64, stream: u64) -> u64 {
    hashing::mix(seed ^ hashing::mix(stream.wrapping_add(0x9e37_79b9_7f4a_7c15)))
}

pub trait Tokenizer {
    /// Content token ids for `text`, without special tokens. Deterministic.
    fn tokenize(&self, text: &str) -> Result<TokenSequence, BackendError>;
}

/// One instantiated encoder with its (possibly trainable) parameters.
pub trait Encoder: Tokenizer + Send {
    /// Dimension of the pooled representation.
    fn dim(&self) -> usize;

    /// Pooled sequence-start representation for already-truncated content tokens.
    fn encode(&self, tokens: &[TokenId]) -> Result<Vec<f64>, BackendError>;

    fn is_trainable(&self) -> bool {
        false
    }

    /// Accumulate parameter gradients given d(loss)/d(pooled) for `tokens`.
    fn accumulate_grad(&mut self, _tokens: &[TokenId], _grad_pooled: &[f64]) -> Result<(), BackendError> {
        Ok(())
    }

    fn zero_grad(&mut self) {}

    /// Flat parameter and gradient buffers, empty for frozen encoders.
    fn params_and_grads(&mut self) -> (&mut [f64], &[f64]) {
        (&mut [], &[])
    }

    fn params(&self) -> &[f64] {
        &[]
    }
}

/// A model family that can build seeded encoders.
pub trait EncoderBackend: Send + Sync {
    fn id(&self) -> String;

    /// Special-token slots the encoder adds around content tokens.
    fn n_special(&self) -> usize;

    fn build(&self, seed: u64) -> Result<Box<dyn Encoder>, BackendError>;
}

/// Serializable backend selection, as found in run configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BackendConfig {
    ToyLinear {
        #[serde(default = "defaults::linear_dim")]
        dim: usize,
        #[serde(default)]
        projection_seed: u64,
    },
    ToyTransformer {
        #[serde(default = "defaults::vocab")]
        vocab_size: usize,
        #[serde(default = "defaults::d_model")]
        d_model: usize,
        #[serde(default = "defaults::d_ff")]
        d_ff: usize,
        #[serde(default = "defaults::max_positions")]
        max_positions: usize,
    },
    External {
        command: Vec<String>,
        #[serde(default = "defaults::n_special")]
        n_special: usize,
    },
}

mod defaults {
    pub fn linear_dim() -> usize {
        super::toy_linear::DEFAULT_DIM
    }
    pub fn vocab() -> usize {
        2048
    }
    pub fn d_model() -> usize {
        32
    }
    pub fn d_ff() -> usize {
        64
    }
    pub fn max_positions() -> usize {
        514
    }
    pub fn n_special() -> usize {
        2
    }
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig::ToyLinear { dim: defaults::linear_dim(), projection_seed: 0 }
    }
}

impl BackendConfig {
    /// Config for a backend name with default settings.
    pub fn from_name(name: &str) -> Result<Self, BackendError> {
        match name {
            "toy-linear" => Ok(Self::default()),
            "toy-transformer" => Ok(BackendConfig::ToyTransformer {
                vocab_size: defaults::vocab(),
                d_model: defaults::d_model(),
                d_ff: defaults::d_ff(),
                max_positions: defaults::max_positions(),
            }),
            "external" => Err(BackendError::Config("the external backend needs a `command`".into())),
            other => Err(BackendError::Config(format!(
                "unknown backend {other:?}; expected toy-linear, toy-transformer or external"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            BackendConfig::ToyLinear { .. } => "toy-linear",
            BackendConfig::ToyTransformer { .. } => "toy-transformer",
            BackendConfig::External { .. } => "external",
        }
    }

    pub fn build(&self) -> Result<Box<dyn EncoderBackend>, BackendError> {
        Ok(match self {
            BackendConfig::ToyLinear { dim, projection_seed } => Box::new(ToyLinear::new(*dim, *projection_seed)?),
            BackendConfig::ToyTransformer { vocab_size, d_model, d_ff, max_positions } => {
                Box::new(ToyTransformer::new(*vocab_size, *d_model, *d_ff, *max_positions)?)
            }
            BackendConfig::External { command, n_special } => Box::new(ExternalBackend::new(command.clone(), *n_special)?),
        })
    }
}
