//! Severity classification of depression signs in social-media text:
//! dataset handling, head+tail truncation, class-imbalance treatments,
//! fine-tuning with grid search and k-fold cross-validation, prediction
//! ensembles, macro-F1 evaluation and pretraining-corpus curation.

pub mod artifacts;
pub mod backend;
pub mod corpus;
pub mod dataset;
pub mod ensemble;
pub mod imbalance;
pub mod label;
pub mod manifest;
pub mod metrics;
pub mod synthetic;
pub mod trainer;
pub mod truncation;

pub use backend::{BackendConfig, BackendError, Encoder, EncoderBackend, Tokenizer};
pub use dataset::{
    label_counts, load_dataset, stratified_kfold, Dataset, DatasetError, FoldAssignment, LabelCounts, LabeledExample,
    SplitTag,
};
pub use ensemble::{Combinator, EnsembleError, EnsembleSpec, MemberSelector, PredictionRecord, Stages};
pub use imbalance::{compute_class_weights, ClassWeights, ImbalanceStrategy};
pub use label::{Severity, NUM_CLASSES};
pub use manifest::RunManifest;
pub use metrics::{macro_f1, ConfusionMatrix, MetricsReport};
pub use trainer::{TrainError, TrialConfig};
pub use truncation::{TokenBudgetPlan, TokenSequence, TruncationPreset};
