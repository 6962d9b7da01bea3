use rayon::prelude::*;

use crate::backend::EncoderBackend;
use crate::dataset::{Dataset, FoldAssignment, SplitTag};
use crate::ensemble::PredictionRecord;
use crate::metrics::cv_mean;

use super::{fit, FoldResult, TrainError, TrialConfig};

#[derive(Debug, Clone)]
pub struct CvOutcome {
    /// Mean of the per-fold best dev macro-F1.
    pub mean_macro_f1: f64,
    pub folds: Vec<FoldResult>,
    /// Every fold model's predictions on the held-out test set, if one was given.
    pub test_predictions: Vec<PredictionRecord>,
}

impl CvOutcome {
    /// Out-of-fold predictions, one per example of the combined set.
    pub fn oof_predictions(&self) -> impl Iterator<Item = &PredictionRecord> {
        self.folds.iter().flat_map(|f| f.predictions.iter())
    }
}

/// Train one model per fold on the other folds and validate on it.
///
/// Folds train in parallel with per-fold seeds, so the outcome matches a
/// serial run exactly.
pub fn cross_validate(
    config: &TrialConfig,
    combined: &Dataset,
    folds: &FoldAssignment,
    backend: &dyn EncoderBackend,
    model_id: &str,
    test: Option<&Dataset>,
) -> Result<CvOutcome, TrainError> {
    config.validate()?;
    let missing: Vec<String> =
        combined.examples().iter().filter(|e| folds.fold_of(&e.id).is_none()).map(|e| e.id.clone()).collect();
    if !missing.is_empty() {
        return Err(TrainError::FoldCoverage(missing));
    }
    let splits: Vec<(Vec<usize>, Vec<usize>)> = (0..folds.k).map(|i| folds.split_indices(combined, i)).collect();
    if let Some(i) = splits.iter().position(|(_, valid)| valid.is_empty()) {
        return Err(TrainError::EmptyFold(i));
    }

    let results: Vec<(FoldResult, Vec<PredictionRecord>)> = splits
        .into_par_iter()
        .enumerate()
        .map(|(i, (train_idx, valid_idx))| {
            let train = combined.select(&train_idx, SplitTag::Train);
            let valid = combined.select(&valid_idx, SplitTag::Dev);
            let out = fit(config, &train, &valid, backend, model_id, i)?;
            let test_preds = match test {
                Some(t) => out.model.predict(t)?,
                None => Vec::new(),
            };
            log::info!("{model_id} fold {i}: best dev macro-F1 {:.4} after {} epochs", out.result.best_dev_macro_f1, out.result.epochs_run);
            Ok((out.result, test_preds))
        })
        .collect::<Result<_, TrainError>>()?;

    let scores: Vec<f64> = results.iter().map(|(r, _)| r.best_dev_macro_f1).collect();
    let mean_macro_f1 = cv_mean(&scores)?;
    let (folds, test): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    Ok(CvOutcome { mean_macro_f1, folds, test_predictions: test.into_iter().flatten().collect() })
}
