use std::fmt;
use std::time::Instant;

use indexmap::IndexMap;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backend::EncoderBackend;
use crate::dataset::Dataset;

use super::{train_one, TrainError, TrialConfig};

/// Hyperparameters a grid may vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridKey {
    LearningRate,
    TaskDropout,
    WarmupSteps,
    WeightDecay,
    BatchSize,
    MaxEpochs,
    HeadFraction,
    Seed,
}

impl fmt::Display for GridKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("unit variant");
        f.write_str(s.as_str().expect("string tag"))
    }
}

impl GridKey {
    fn apply(self, cfg: &mut TrialConfig, value: f64) -> Result<(), TrainError> {
        let as_count = |v: f64| -> Result<usize, TrainError> {
            if v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
                Ok(v as usize)
            } else {
                Err(TrainError::Config(format!("{self} needs a non-negative integer, got {v}")))
            }
        };
        match self {
            GridKey::LearningRate => cfg.learning_rate = value,
            GridKey::TaskDropout => cfg.task_dropout = value,
            GridKey::WarmupSteps => cfg.warmup_steps = as_count(value)?,
            GridKey::WeightDecay => cfg.weight_decay = value,
            GridKey::BatchSize => cfg.batch_size = as_count(value)?,
            GridKey::MaxEpochs => cfg.max_epochs = as_count(value)?,
            GridKey::HeadFraction => cfg.truncation.head_fraction = value,
            GridKey::Seed => cfg.seed = as_count(value)? as u64,
        }
        Ok(())
    }
}

/// Ordered axes of a Cartesian search. The first axis varies slowest.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Grid(pub IndexMap<GridKey, Vec<f64>>);

impl Grid {
    /// Learning rate x task dropout x warmup x weight decay, 48 points.
    pub fn reference() -> Self {
        let mut axes = IndexMap::new();
        axes.insert(GridKey::LearningRate, vec![2e-6, 4e-6, 6e-6, 8e-6]);
        axes.insert(GridKey::TaskDropout, vec![0.0, 0.2, 0.4]);
        axes.insert(GridKey::WarmupSteps, vec![200.0, 500.0]);
        axes.insert(GridKey::WeightDecay, vec![0.0, 0.01]);
        Grid(axes)
    }

    pub fn len(&self) -> usize {
        self.0.values().map(Vec::len).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Every grid point applied on top of `base`, in enumeration order.
    pub fn points(&self, base: &TrialConfig) -> Result<Vec<TrialConfig>, TrainError> {
        if let Some((key, _)) = self.0.iter().find(|(_, v)| v.is_empty()) {
            return Err(TrainError::EmptyGrid(key.to_string()));
        }
        let mut points = vec![base.clone()];
        for (&key, values) in &self.0 {
            let mut next = Vec::with_capacity(points.len() * values.len());
            for p in &points {
                for &v in values {
                    let mut cfg = p.clone();
                    key.apply(&mut cfg, v)?;
                    next.push(cfg);
                }
            }
            points = next;
        }
        Ok(points)
    }
}

/// One line of the trial log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub config: TrialConfig,
    /// `None` when the trial aborted (scored as negative infinity).
    pub dev_macro_f1: Option<f64>,
    pub epochs_run: usize,
    pub wall_seconds: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl TrialRecord {
    pub fn score(&self) -> f64 {
        self.dev_macro_f1.unwrap_or(f64::NEG_INFINITY)
    }
}

#[derive(Debug, Clone)]
pub struct GridOutcome {
    pub best: TrialConfig,
    pub best_trial: usize,
    pub log: Vec<TrialRecord>,
}

/// Run every grid point on train/dev and pick the best dev macro-F1.
///
/// Ties go to the lower learning rate, then the lower dropout, then the
/// earlier point. Aborted trials are logged and never win unless every
/// trial aborted, which is an error. Trials run in parallel; results do not
/// depend on scheduling.
pub fn grid_search(
    grid: &Grid,
    base: &TrialConfig,
    train: &Dataset,
    dev: &Dataset,
    backend: &dyn EncoderBackend,
) -> Result<GridOutcome, TrainError> {
    let points = grid.points(base)?;
    let log: Vec<TrialRecord> = points
        .into_par_iter()
        .enumerate()
        .map(|(trial, config)| {
            let start = Instant::now();
            let outcome = train_one(&config, train, dev, backend);
            let wall_seconds = start.elapsed().as_secs_f64();
            match outcome {
                Ok(r) => TrialRecord {
                    trial,
                    config,
                    dev_macro_f1: Some(r.best_dev_macro_f1),
                    epochs_run: r.epochs_run,
                    wall_seconds,
                    error: None,
                },
                Err(e) => {
                    log::warn!("trial {trial} aborted: {e}");
                    TrialRecord { trial, config, dev_macro_f1: None, epochs_run: 0, wall_seconds, error: Some(e.to_string()) }
                }
            }
        })
        .collect();

    let Some(best) = select_best(&log) else {
        return Err(TrainError::AllTrialsAborted(log));
    };
    Ok(GridOutcome { best: log[best].config.clone(), best_trial: best, log })
}

fn select_best(log: &[TrialRecord]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, rec) in log.iter().enumerate() {
        if rec.dev_macro_f1.is_none() {
            continue;
        }
        let better = match best {
            None => true,
            Some(b) => {
                let cur = &log[b];
                let (s, t) = (rec.score(), cur.score());
                s > t
                    || (s == t
                        && (rec.config.learning_rate, rec.config.task_dropout)
                            < (cur.config.learning_rate, cur.config.task_dropout))
            }
        };
        if better {
            best = Some(i);
        }
    }
    best
}
