//! Macro-F1 and cross-validation aggregation.

use serde::{Deserialize, Serialize};

use crate::label::NUM_CLASSES;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MetricsError {
    #[error("length mismatch: {truths} truths vs {preds} predictions")]
    LengthMismatch { truths: usize, preds: usize },
    #[error("label {label} out of range for {k} classes")]
    LabelOutOfRange { label: usize, k: usize },
    #[error("no fold scores to average")]
    Empty,
}

/// Rows are true labels, columns predicted labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn from_labels(truths: &[usize], preds: &[usize], k: usize) -> Result<Self, MetricsError> {
        if truths.len() != preds.len() {
            return Err(MetricsError::LengthMismatch { truths: truths.len(), preds: preds.len() });
        }
        let mut counts = vec![vec![0usize; k]; k];
        for (&t, &p) in truths.iter().zip(preds) {
            let bad = if t >= k { Some(t) } else if p >= k { Some(p) } else { None };
            if let Some(label) = bad {
                return Err(MetricsError::LabelOutOfRange { label, k });
            }
            counts[t][p] += 1;
        }
        Ok(Self { counts })
    }

    pub fn num_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    fn true_positives(&self, c: usize) -> usize {
        self.counts[c][c]
    }

    fn predicted(&self, c: usize) -> usize {
        self.counts.iter().map(|row| row[c]).sum()
    }

    fn actual(&self, c: usize) -> usize {
        self.counts[c].iter().sum()
    }

    /// Precision of class `c`; 0 when nothing was predicted as `c`.
    pub fn precision(&self, c: usize) -> f64 {
        ratio(self.true_positives(c), self.predicted(c))
    }

    /// Recall of class `c`; 0 when `c` never occurs.
    pub fn recall(&self, c: usize) -> f64 {
        ratio(self.true_positives(c), self.actual(c))
    }

    pub fn f1(&self, c: usize) -> f64 {
        let (p, r) = (self.precision(c), self.recall(c));
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }

    pub fn per_class_f1(&self) -> Vec<f64> {
        (0..self.num_classes()).map(|c| self.f1(c)).collect()
    }

    pub fn macro_f1(&self) -> f64 {
        let k = self.num_classes();
        if k == 0 {
            return 0.0;
        }
        self.per_class_f1().iter().sum::<f64>() / k as f64
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Unweighted mean of per-class F1 over all three severity classes.
pub fn macro_f1(truths: &[usize], preds: &[usize]) -> Result<f64, MetricsError> {
    Ok(ConfusionMatrix::from_labels(truths, preds, NUM_CLASSES)?.macro_f1())
}

pub fn cv_mean(fold_scores: &[f64]) -> Result<f64, MetricsError> {
    if fold_scores.is_empty() {
        return Err(MetricsError::Empty);
    }
    Ok(fold_scores.iter().sum::<f64>() / fold_scores.len() as f64)
}

/// Persisted evaluation summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// Per-fold best macro-F1; empty for a single evaluation.
    pub per_fold: Vec<f64>,
    pub mean: f64,
    /// Macro-F1 over the pooled predictions.
    pub macro_f1: f64,
    pub per_class_f1: Vec<f64>,
    pub per_class_recall: Vec<f64>,
    pub confusion_matrix: Vec<Vec<usize>>,
}

impl MetricsReport {
    /// Report over pooled predictions. `per_fold` may be empty, in which case
    /// `mean` is the pooled macro-F1.
    pub fn new(truths: &[usize], preds: &[usize], per_fold: Vec<f64>) -> Result<Self, MetricsError> {
        let cm = ConfusionMatrix::from_labels(truths, preds, NUM_CLASSES)?;
        let pooled = cm.macro_f1();
        let mean = if per_fold.is_empty() { pooled } else { cv_mean(&per_fold)? };
        Ok(Self {
            per_fold,
            mean,
            macro_f1: pooled,
            per_class_f1: cm.per_class_f1(),
            per_class_recall: (0..NUM_CLASSES).map(|c| cm.recall(c)).collect(),
            confusion_matrix: cm.counts,
        })
    }
}
