use std::collections::{BTreeSet, HashMap};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use depscreen_core::artifacts::{read_json, read_jsonl, write_json};
use depscreen_core::dataset::{load_dataset, Dataset, SplitTag};
use depscreen_core::ensemble::{
    load_submission, model_ids, run_ensemble as apply_spec, save_submission, Combinator, EnsembleSpec, MemberSelector,
    PredictionRecord, Stages,
};
use depscreen_core::metrics::{macro_f1, MetricsReport};
use indexmap::IndexMap;

use crate::report::metrics_summary;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// Regression mean over one model's fold models.
    #[value(name = "best-model-4-mean")]
    BestModel4Mean,
    /// Regression mean per model, then voting across models.
    #[value(name = "kfold-mean-9-mode")]
    KfoldMean9Mode,
    /// One vote over every (model, fold) output.
    #[value(name = "all-36-mode")]
    All36Mode,
    /// Regression mean over all records of each model, any fold (for out-of-fold predictions).
    Pooled,
}

#[derive(Debug, Clone, Args)]
pub struct EnsembleArgs {
    /// Ensemble spec (JSON or TOML).
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    spec: Option<PathBuf>,
    /// Build the spec from the model ids and folds found in the records.
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    /// Model for best-model-4-mean; defaults to the first model in the records.
    #[arg(long)]
    model: Option<String>,
    /// Prediction-record JSONL files.
    #[arg(long, required = true, num_args = 1..)]
    predictions: Vec<PathBuf>,
    /// Submission file to write (`pid,label`).
    #[arg(long)]
    out: PathBuf,
    /// Labeled file to score every combinator against.
    #[arg(long)]
    gold: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    /// Labeled `pid,text,label` file.
    #[arg(long)]
    gold: PathBuf,
    /// Submission file (`pid,label`).
    #[arg(long, conflicts_with = "predictions", required_unless_present = "predictions")]
    submission: Option<PathBuf>,
    /// Prediction-record JSONL files with one record per example.
    #[arg(long, num_args = 1..)]
    predictions: Vec<PathBuf>,
    /// Metrics JSON to write.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load_records(paths: &[PathBuf]) -> Result<Vec<PredictionRecord>> {
    let mut records = Vec::new();
    for p in paths {
        records.extend(read_jsonl::<PredictionRecord>(p)?);
    }
    Ok(records)
}

fn load_spec(path: &Path) -> Result<EnsembleSpec> {
    if path.extension().is_some_and(|e| e == "toml") {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    } else {
        Ok(read_json(path)?)
    }
}

fn preset_spec(preset: Preset, model: Option<&str>, records: &[PredictionRecord]) -> Result<EnsembleSpec> {
    let models = model_ids(records);
    if models.is_empty() {
        bail!("no prediction records");
    }
    let folds_of = |m: &str| -> BTreeSet<usize> { records.iter().filter(|r| r.model_id == m).map(|r| r.fold).collect() };
    let fold_members = |m: &str| -> Vec<MemberSelector> {
        folds_of(m).into_iter().map(|f| MemberSelector::new(m, Some(f))).collect()
    };
    let name = Some(format!("{preset:?}"));
    let spec = match preset {
        Preset::BestModel4Mean => {
            let m = model.unwrap_or(&models[0]);
            let members = fold_members(m);
            if members.is_empty() {
                bail!("no records for model {m:?}; models present: {}", models.join(", "));
            }
            EnsembleSpec::new(name, members, Stages::Flat(Combinator::RegressionMean))?
        }
        Preset::KfoldMean9Mode => EnsembleSpec::new(
            name,
            models.iter().flat_map(|m| fold_members(m)).collect(),
            Stages::Hierarchical { per_model: Combinator::RegressionMean, across_models: Combinator::Voting },
        )?,
        Preset::All36Mode => EnsembleSpec::new(
            name,
            models.iter().flat_map(|m| fold_members(m)).collect(),
            Stages::Flat(Combinator::Voting),
        )?,
        Preset::Pooled => EnsembleSpec::new(
            name,
            models.iter().map(|m| MemberSelector::new(m.as_str(), None)).collect(),
            Stages::Flat(Combinator::RegressionMean),
        )?,
    };
    Ok(spec)
}

/// Gold labels aligned with `predicted`; every predicted id must be labeled.
fn align(gold: &Dataset, predicted: &IndexMap<String, usize>) -> Result<(Vec<usize>, Vec<usize>)> {
    let labels: HashMap<&str, usize> = gold.examples().iter().map(|e| (e.id.as_str(), e.label.index())).collect();
    let unknown: Vec<&str> = predicted.keys().map(String::as_str).filter(|id| !labels.contains_key(id)).collect();
    if !unknown.is_empty() {
        bail!("{} predicted ids have no gold label, e.g. {:?}", unknown.len(), &unknown[..unknown.len().min(5)]);
    }
    Ok(predicted.iter().map(|(id, &p)| (labels[id.as_str()], p)).unzip())
}

pub fn run_ensemble(args: &EnsembleArgs) -> Result<()> {
    let records = load_records(&args.predictions)?;
    let spec = match (&args.spec, args.preset) {
        (Some(path), _) => load_spec(path)?,
        (None, Some(preset)) => preset_spec(preset, args.model.as_deref(), &records)?,
        (None, None) => unreachable!("clap requires --spec or --preset"),
    };
    let labels = apply_spec(&spec, &records).context("running ensemble")?;
    save_submission(&args.out, &labels)?;
    println!(
        "{}: {} members, {} examples -> {}",
        spec.name.as_deref().unwrap_or("ensemble"),
        spec.members.len(),
        labels.len(),
        args.out.display()
    );

    if let Some(gold_path) = &args.gold {
        let gold = load_dataset(gold_path, SplitTag::Test)?;
        for kind in Combinator::ALL {
            let out = apply_spec(&spec.with_kind(kind), &records)?;
            let (truths, preds) = align(&gold, &out)?;
            println!("  {:<16} macro-F1 {:.4}", kind.name(), macro_f1(&truths, &preds)?);
        }
    }
    Ok(())
}

fn predictions_from_records(records: &[PredictionRecord]) -> Result<IndexMap<String, usize>> {
    let mut out = IndexMap::new();
    for r in records {
        if out.insert(r.example_id.clone(), r.label()).is_some() {
            bail!("example {:?} has several prediction records; combine them with `ensemble` first", r.example_id);
        }
    }
    Ok(out)
}

pub fn evaluate(args: &EvaluateArgs) -> Result<()> {
    let gold = load_dataset(&args.gold, SplitTag::Test)?;
    let predicted: IndexMap<String, usize> = match &args.submission {
        Some(p) => load_submission(p)?.into_iter().map(|(id, s)| (id, s.index())).collect(),
        None => predictions_from_records(&load_records(&args.predictions)?)?,
    };
    let missing = gold.examples().iter().filter(|e| !predicted.contains_key(&e.id)).count();
    if missing > 0 {
        bail!("{missing} of {} gold examples have no prediction", gold.len());
    }
    let (truths, preds) = align(&gold, &predicted)?;
    let report = MetricsReport::new(&truths, &preds, Vec::new())?;
    println!("{} examples; {}", truths.len(), metrics_summary(&report));
    if let Some(out) = &args.out {
        write_json(out, &report)?;
    }
    Ok(())
}
