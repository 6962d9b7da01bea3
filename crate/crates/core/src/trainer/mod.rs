//! Fine-tuning: classifier head over a pooled encoder representation,
//! warmup-then-constant learning rate, decoupled-weight-decay Adam,
//! early stopping on dev macro-F1, grid search and k-fold cross-validation.

mod cv;
mod early_stopping;
mod fit;
mod grid;
mod head;
mod optim;

use serde::{Deserialize, Serialize};

use crate::backend::BackendError;
use crate::ensemble::PredictionRecord;
use crate::imbalance::{ImbalanceError, ImbalanceStrategy};
use crate::metrics::MetricsError;
use crate::truncation::TokenBudgetPlan;

pub use cv::{cross_validate, CvOutcome};
pub use early_stopping::{EarlyStopping, Observation};
pub use fit::{fit, train_one, FitOutput, TrainedModel};
pub use grid::{grid_search, Grid, GridKey, GridOutcome, TrialRecord};
pub use head::LinearHead;
pub use optim::{warmup_constant_lr, AdamW};

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("invalid trial config: {0}")]
    Config(String),
    #[error("{0} set is empty")]
    EmptyDataset(&'static str),
    #[error("non-finite loss {loss} at epoch {epoch}, step {step}")]
    NonFiniteLoss { epoch: usize, step: usize, loss: f64 },
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Imbalance(#[from] ImbalanceError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("fold assignment misses {} example(s), e.g. {:?}", .0.len(), .0.first())]
    FoldCoverage(Vec<String>),
    #[error("fold {0} has no validation examples")]
    EmptyFold(usize),
    #[error("grid axis {0} has no values")]
    EmptyGrid(String),
    /// Carries the full trial log so it can still be persisted.
    #[error("all {} grid trials aborted", .0.len())]
    AllTrialsAborted(Vec<TrialRecord>),
}

/// One fully resolved training configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrialConfig {
    pub learning_rate: f64,
    pub task_dropout: f64,
    pub warmup_steps: usize,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub optimizer_eps: f64,
    pub optimizer_beta1: f64,
    pub optimizer_beta2: f64,
    pub es_patience_epochs: usize,
    pub es_threshold: f64,
    pub seed: u64,
    pub truncation: TokenBudgetPlan,
    pub imbalance_strategy: ImbalanceStrategy,
}

impl Default for TrialConfig {
    /// Fixed settings of the reference protocol, with the first value of
    /// each searched hyperparameter.
    fn default() -> Self {
        Self {
            learning_rate: 2e-6,
            task_dropout: 0.0,
            warmup_steps: 200,
            weight_decay: 0.0,
            batch_size: 8,
            max_epochs: 100,
            optimizer_eps: 1e-8,
            optimizer_beta1: 0.9,
            optimizer_beta2: 0.999,
            es_patience_epochs: 2,
            es_threshold: 0.0025,
            seed: 42,
            truncation: TokenBudgetPlan::default(),
            imbalance_strategy: ImbalanceStrategy::Weights,
        }
    }
}

impl TrialConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let finite = [
            ("learning_rate", self.learning_rate),
            ("task_dropout", self.task_dropout),
            ("weight_decay", self.weight_decay),
            ("optimizer_eps", self.optimizer_eps),
            ("optimizer_beta1", self.optimizer_beta1),
            ("optimizer_beta2", self.optimizer_beta2),
            ("es_threshold", self.es_threshold),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                return Err(TrainError::Config(format!("{name} must be finite, got {v}")));
            }
        }
        if self.learning_rate < 0.0 || self.weight_decay < 0.0 || self.es_threshold < 0.0 {
            return Err(TrainError::Config("learning_rate, weight_decay and es_threshold must be non-negative".into()));
        }
        if !(0.0..1.0).contains(&self.task_dropout) {
            return Err(TrainError::Config(format!("task_dropout must lie in [0, 1), got {}", self.task_dropout)));
        }
        if !(0.0..1.0).contains(&self.optimizer_beta1) || !(0.0..1.0).contains(&self.optimizer_beta2) {
            return Err(TrainError::Config("optimizer betas must lie in [0, 1)".into()));
        }
        if self.optimizer_eps <= 0.0 {
            return Err(TrainError::Config("optimizer_eps must be positive".into()));
        }
        if self.batch_size == 0 || self.max_epochs == 0 {
            return Err(TrainError::Config("batch_size and max_epochs must be at least 1".into()));
        }
        self.truncation.validate().map_err(|e| TrainError::Config(e.to_string()))
    }
}

/// Outcome of training on one train/validation split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold_index: usize,
    pub best_dev_macro_f1: f64,
    /// 1-based epoch whose parameters produced `predictions`.
    pub best_epoch: usize,
    pub epochs_run: usize,
    /// Dev macro-F1 after every epoch.
    pub history: Vec<f64>,
    pub predictions: Vec<PredictionRecord>,
}

/// Independent RNG stream for `stream` under a trial seed.
pub(crate) fn derive_seed(seed: u64, stream: u64) -> u64 {
    crate::backend::mix_seed(seed, stream)
}
