//! Class-imbalance strategies: resampling and per-class loss weights.

use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{label_counts, Dataset, LabeledExample};
use crate::label::Severity;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ImbalanceError {
    #[error("class {class} has zero examples; class weights need every count > 0")]
    EmptyClass { class: usize },
    #[error("no classes given")]
    NoClasses,
    #[error("logits contain a non-finite value: {0:?}")]
    NonFiniteLogits(Vec<f64>),
    #[error("label {label} out of range for {k} logits")]
    LabelOutOfRange { label: usize, k: usize },
    #[error("{weights} weights given for {k} logits")]
    WeightCountMismatch { weights: usize, k: usize },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImbalanceStrategy {
    #[default]
    None,
    Undersample,
    Oversample,
    Weights,
}

impl ImbalanceStrategy {
    pub const ALL: [ImbalanceStrategy; 4] = [
        ImbalanceStrategy::None,
        ImbalanceStrategy::Undersample,
        ImbalanceStrategy::Oversample,
        ImbalanceStrategy::Weights,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ImbalanceStrategy::None => "none",
            ImbalanceStrategy::Undersample => "undersample",
            ImbalanceStrategy::Oversample => "oversample",
            ImbalanceStrategy::Weights => "weights",
        }
    }
}

impl fmt::Display for ImbalanceStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ImbalanceStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| format!("unknown imbalance strategy {s:?}; expected none, undersample, oversample or weights"))
    }
}

/// Per-class loss multipliers, indexed by label ordinal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassWeights(pub Vec<f64>);

impl ClassWeights {
    pub fn uniform(k: usize) -> Self {
        Self(vec![1.0; k])
    }

    pub fn get(&self, label: usize) -> f64 {
        self.0[label]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self(self.0.iter().map(|w| w * factor).collect())
    }
}

/// Inverse-frequency weights `w_c = N / (K * n_c)`.
///
/// Under the source distribution the count-weighted sum of weights equals
/// `N`, so the expected loss scale matches an unweighted run.
pub fn compute_class_weights(counts: &[usize]) -> Result<ClassWeights, ImbalanceError> {
    if counts.is_empty() {
        return Err(ImbalanceError::NoClasses);
    }
    if let Some(class) = counts.iter().position(|&n| n == 0) {
        return Err(ImbalanceError::EmptyClass { class });
    }
    let total: usize = counts.iter().sum();
    let k = counts.len() as f64;
    Ok(ClassWeights(counts.iter().map(|&n| total as f64 / (k * n as f64)).collect()))
}

fn group_by_label(dataset: &Dataset) -> Vec<(Severity, Vec<usize>)> {
    Severity::ALL
        .iter()
        .map(|&sev| {
            let idx = dataset
                .examples()
                .iter()
                .enumerate()
                .filter(|(_, e)| e.label == sev)
                .map(|(i, _)| i)
                .collect::<Vec<_>>();
            (sev, idx)
        })
        .filter(|(_, idx)| !idx.is_empty())
        .collect()
}

/// Randomly drop examples so every class present matches the smallest class.
/// Survivors keep their input order.
pub fn undersample(dataset: &Dataset, seed: u64) -> Dataset {
    let groups = group_by_label(dataset);
    let Some(target) = groups.iter().map(|(_, idx)| idx.len()).min() else {
        return dataset.clone();
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep = vec![false; dataset.len()];
    for (_, idx) in &groups {
        for pick in sample(&mut rng, idx.len(), target) {
            keep[idx[pick]] = true;
        }
    }
    let examples = dataset
        .examples()
        .iter()
        .zip(keep)
        .filter(|(_, k)| *k)
        .map(|(e, _)| e.clone())
        .collect();
    Dataset::resampled(examples, dataset.split())
}

/// Replicate whole examples so every class present matches the largest class.
///
/// A class of size `n` growing to `m` gets `(m - n) / n` full extra copies of
/// each member plus `(m - n) % n` members drawn without replacement for one
/// more copy. Replicas follow their source row.
pub fn oversample(dataset: &Dataset, seed: u64) -> Dataset {
    let groups = group_by_label(dataset);
    let Some(target) = groups.iter().map(|(_, idx)| idx.len()).max() else {
        return dataset.clone();
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut copies = vec![1usize; dataset.len()];
    for (_, idx) in &groups {
        let n = idx.len();
        let needed = target - n;
        for &i in idx {
            copies[i] += needed / n;
        }
        for pick in sample(&mut rng, n, needed % n) {
            copies[idx[pick]] += 1;
        }
    }
    let examples: Vec<LabeledExample> = dataset
        .examples()
        .iter()
        .zip(copies)
        .flat_map(|(e, c)| std::iter::repeat(e).take(c).cloned())
        .collect();
    Dataset::resampled(examples, dataset.split())
}

/// Apply a resampling strategy to a training set. Non-sampling strategies
/// return the input unchanged.
pub fn resample(dataset: &Dataset, strategy: ImbalanceStrategy, seed: u64) -> Dataset {
    match strategy {
        ImbalanceStrategy::Undersample => undersample(dataset, seed),
        ImbalanceStrategy::Oversample => oversample(dataset, seed),
        ImbalanceStrategy::None | ImbalanceStrategy::Weights => dataset.clone(),
    }
}

/// Class weights for a training set under `strategy`: inverse-frequency for
/// `Weights`, all-ones otherwise. Absent classes get weight 1.
pub fn weights_for(dataset: &Dataset, strategy: ImbalanceStrategy) -> ClassWeights {
    let counts = label_counts(dataset);
    let k = counts.as_slice().len();
    if strategy != ImbalanceStrategy::Weights {
        return ClassWeights::uniform(k);
    }
    let present: Vec<usize> = counts.as_slice().iter().copied().filter(|&n| n > 0).collect();
    let Ok(w) = compute_class_weights(&present) else {
        return ClassWeights::uniform(k);
    };
    let mut it = w.0.into_iter();
    ClassWeights(counts.as_slice().iter().map(|&n| if n > 0 { it.next().unwrap() } else { 1.0 }).collect())
}

pub(crate) fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|&z| (z - max).exp()).sum::<f64>().ln();
    logits.iter().map(|&z| z - lse).collect()
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

fn check_inputs(logits: &[f64], label: usize, weights: &ClassWeights) -> Result<(), ImbalanceError> {
    if logits.iter().any(|z| !z.is_finite()) {
        return Err(ImbalanceError::NonFiniteLogits(logits.to_vec()));
    }
    if label >= logits.len() {
        return Err(ImbalanceError::LabelOutOfRange { label, k: logits.len() });
    }
    if weights.0.len() != logits.len() {
        return Err(ImbalanceError::WeightCountMismatch { weights: weights.0.len(), k: logits.len() });
    }
    Ok(())
}

/// `w[label] * -log softmax(logits)[label]`.
pub fn weighted_cross_entropy(logits: &[f64], label: usize, weights: &ClassWeights) -> Result<f64, ImbalanceError> {
    check_inputs(logits, label, weights)?;
    Ok(-weights.get(label) * log_softmax(logits)[label])
}

/// Loss and its gradient with respect to the logits:
/// `w[label] * (softmax(logits) - onehot(label))`.
pub fn weighted_cross_entropy_grad(
    logits: &[f64],
    label: usize,
    weights: &ClassWeights,
) -> Result<(f64, Vec<f64>), ImbalanceError> {
    check_inputs(logits, label, weights)?;
    let w = weights.get(label);
    let logp = log_softmax(logits);
    let grad = logp
        .iter()
        .enumerate()
        .map(|(c, lp)| w * (lp.exp() - if c == label { 1.0 } else { 0.0 }))
        .collect();
    Ok((-w * logp[label], grad))
}
