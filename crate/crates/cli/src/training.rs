use std::path::Path;

use anyhow::{Context, Result};
use depscreen_core::artifacts::{append_jsonl, read_json, write_json, write_jsonl};
use depscreen_core::backend::EncoderBackend;
use depscreen_core::dataset::FoldAssignment;
use depscreen_core::ensemble::PredictionRecord;
use depscreen_core::manifest::RunManifest;
use depscreen_core::metrics::MetricsReport;
use depscreen_core::trainer::{self, FoldResult, TrainError, TrialConfig, TrialRecord};
use serde::Serialize;

use crate::config::Config;
use crate::report::{create_dir, load_splits, load_test, metrics_summary};

/// A fold result without its prediction records.
#[derive(Debug, Serialize)]
struct FoldSummary<'a> {
    fold_index: usize,
    best_dev_macro_f1: f64,
    best_epoch: usize,
    epochs_run: usize,
    history: &'a [f64],
}

impl<'a> From<&'a FoldResult> for FoldSummary<'a> {
    fn from(r: &'a FoldResult) -> Self {
        Self {
            fold_index: r.fold_index,
            best_dev_macro_f1: r.best_dev_macro_f1,
            best_epoch: r.best_epoch,
            epochs_run: r.epochs_run,
            history: &r.history,
        }
    }
}

fn trial_config(config: &Config, backend: &dyn EncoderBackend, path: Option<&Path>) -> Result<TrialConfig> {
    match path {
        Some(p) => {
            let t: TrialConfig = read_json(p)?;
            t.validate().with_context(|| format!("invalid trial config {}", p.display()))?;
            Ok(t)
        }
        None => config.trial_config(backend),
    }
}

fn manifest(config: &Config, trial: &TrialConfig, backend: &dyn EncoderBackend) -> Result<RunManifest> {
    let mut value = serde_json::to_value(config)?;
    value["resolved_trial"] = serde_json::to_value(trial)?;
    let mut m = RunManifest::new(value, backend.id());
    m.add_dataset("train", config.require_train()?)?;
    for (role, path) in [("dev", &config.data.dev), ("test", &config.data.test)] {
        if let Some(p) = path {
            m.add_dataset(role, p)?;
        }
    }
    Ok(m)
}

fn truths_and_preds(records: &[PredictionRecord], gold: &depscreen_core::Dataset) -> (Vec<usize>, Vec<usize>) {
    let by_id: std::collections::HashMap<&str, usize> =
        gold.examples().iter().map(|e| (e.id.as_str(), e.label.index())).collect();
    records.iter().map(|r| (by_id[r.example_id.as_str()], r.label())).unzip()
}

pub fn train(config: &Config, trial_path: Option<&Path>) -> Result<()> {
    let backend = config.backend()?;
    let trial = trial_config(config, backend.as_ref(), trial_path)?;
    let splits = load_splits(config)?;
    let dev = splits.dev.as_ref().context("train needs data.dev")?;
    let model_id = config.model_id(backend.as_ref());

    let out = trainer::fit(&trial, &splits.train, dev, backend.as_ref(), &model_id, 0)?;
    let result = &out.result;
    let (truths, preds) = truths_and_preds(&result.predictions, dev);
    let metrics = MetricsReport::new(&truths, &preds, vec![result.best_dev_macro_f1])?;

    let dir = config.run.dir.join("train");
    create_dir(&dir)?;
    let mut m = manifest(config, &trial, backend.as_ref())?;
    for (name, path) in [
        ("result", dir.join("result.json")),
        ("dev_predictions", dir.join("dev_predictions.jsonl")),
        ("metrics", dir.join("metrics.json")),
    ] {
        m.add_artifact(name, &path);
    }
    write_json(&dir.join("result.json"), &FoldSummary::from(result))?;
    write_jsonl(&dir.join("dev_predictions.jsonl"), &result.predictions)?;
    write_json(&dir.join("metrics.json"), &metrics)?;
    write_json(&dir.join("trial_config.json"), &trial)?;
    m.save(&dir.join("manifest.json"))?;

    println!(
        "{model_id}: best dev macro-F1 {:.4} at epoch {} of {}",
        result.best_dev_macro_f1, result.best_epoch, result.epochs_run
    );
    println!("{}", metrics_summary(&metrics));
    Ok(())
}

pub fn grid_search(config: &Config) -> Result<()> {
    let backend = config.backend()?;
    let base = config.trial_config(backend.as_ref())?;
    let grid = config.grid()?;
    let splits = load_splits(config)?;
    let dev = splits.dev.as_ref().context("grid-search needs data.dev")?;

    let dir = config.run.dir.join("grid");
    create_dir(&dir)?;
    let log_path = dir.join("trials.jsonl");
    let append = |log: &[TrialRecord]| -> Result<()> {
        for rec in log {
            append_jsonl(&log_path, rec)?;
        }
        Ok(())
    };

    let outcome = match trainer::grid_search(&grid, &base, &splits.train, dev, backend.as_ref()) {
        Ok(o) => o,
        Err(TrainError::AllTrialsAborted(log)) => {
            append(&log)?;
            anyhow::bail!("all {} grid trials aborted; see {}", log.len(), log_path.display());
        }
        Err(e) => return Err(e.into()),
    };
    append(&outcome.log)?;
    let best_path = dir.join("best_config.json");
    write_json(&best_path, &outcome.best)?;
    let mut m = manifest(config, &base, backend.as_ref())?;
    m.config["grid"] = serde_json::to_value(&grid)?;
    m.add_artifact("trials", &log_path);
    m.add_artifact("best_config", &best_path);
    m.save(&dir.join("manifest.json"))?;

    let aborted = outcome.log.iter().filter(|r| r.error.is_some()).count();
    let best = &outcome.log[outcome.best_trial];
    println!(
        "{} trials ({} aborted); best trial {} with dev macro-F1 {:.4}",
        outcome.log.len(),
        aborted,
        outcome.best_trial,
        best.score()
    );
    println!("wrote {}", best_path.display());
    Ok(())
}

pub fn cv(config: &Config, trial_path: Option<&Path>) -> Result<()> {
    let backend = config.backend()?;
    let trial = trial_config(config, backend.as_ref(), trial_path)?;
    let splits = load_splits(config)?;
    let test = load_test(config)?;
    let folds_path = config.run.dir.join("folds.csv");
    let folds = FoldAssignment::load(&folds_path)
        .with_context(|| format!("loading {}; run `prepare` first", folds_path.display()))?;
    let model_id = config.model_id(backend.as_ref());

    let outcome =
        trainer::cross_validate(&trial, &splits.combined, &folds, backend.as_ref(), &model_id, test.as_ref())?;
    let oof: Vec<PredictionRecord> = outcome.oof_predictions().cloned().collect();
    let (truths, preds) = truths_and_preds(&oof, &splits.combined);
    let per_fold: Vec<f64> = outcome.folds.iter().map(|f| f.best_dev_macro_f1).collect();
    let metrics = MetricsReport::new(&truths, &preds, per_fold)?;

    let dir = config.run.dir.join("cv");
    let pred_dir = dir.join("predictions");
    create_dir(&pred_dir)?;
    let mut m = manifest(config, &trial, backend.as_ref())?;
    m.fold_seed = folds
        .seed
        .or_else(|| RunManifest::load(&config.run.dir.join("manifest.json")).ok().and_then(|p| p.fold_seed));
    m.add_artifact("folds", &folds_path);
    for f in &outcome.folds {
        let p = pred_dir.join(format!("fold{}.jsonl", f.fold_index));
        write_jsonl(&p, &f.predictions)?;
        m.add_artifact(&format!("fold{}_predictions", f.fold_index), &p);
    }
    if test.is_some() {
        let p = dir.join("test_predictions.jsonl");
        write_jsonl(&p, &outcome.test_predictions)?;
        m.add_artifact("test_predictions", &p);
    }
    let summaries: Vec<FoldSummary> = outcome.folds.iter().map(FoldSummary::from).collect();
    write_json(&dir.join("folds.json"), &summaries)?;
    write_json(&dir.join("metrics.json"), &metrics)?;
    write_json(&dir.join("trial_config.json"), &trial)?;
    m.add_artifact("metrics", &dir.join("metrics.json"));
    m.save(&dir.join("manifest.json"))?;

    println!("{model_id}: {}-fold mean macro-F1 {:.4}", folds.k, outcome.mean_macro_f1);
    println!("{}", metrics_summary(&metrics));
    println!("wrote {}", dir.display());
    Ok(())
}
