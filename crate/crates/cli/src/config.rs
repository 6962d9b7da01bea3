//! Declarative run configuration.
//!
//! A TOML file with sections `run`, `data`, `folds`, `trainer`,
//! `truncation`, `imbalance`, `backend`, `grid` and `ensemble`. Every key
//! can be overridden with `--set section.key=value`; values parse as TOML
//! and fall back to plain strings.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use depscreen_core::backend::{BackendConfig, EncoderBackend};
use depscreen_core::imbalance::ImbalanceStrategy;
use depscreen_core::trainer::{Grid, TrialConfig};
use depscreen_core::truncation::{TokenBudgetPlan, TruncationPreset};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub run: RunSection,
    pub data: DataSection,
    pub folds: FoldsSection,
    pub trainer: TrialConfig,
    pub truncation: TruncationSection,
    pub imbalance: ImbalanceSection,
    pub backend: BackendConfig,
    pub grid: GridSection,
    pub ensemble: EnsembleSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    /// Every output of a subcommand lands under this directory.
    pub dir: PathBuf,
    /// Label for prediction records; defaults to the backend id.
    pub model_id: Option<String>,
}

impl Default for RunSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("run"), model_id: None }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub train: Option<PathBuf>,
    pub dev: Option<PathBuf>,
    pub test: Option<PathBuf>,
    /// Drop exact duplicate texts from the combined set before folding.
    pub dedup: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FoldsSection {
    pub k: usize,
    pub seed: u64,
}

impl Default for FoldsSection {
    fn default() -> Self {
        Self { k: 4, seed: 42 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TruncationSection {
    pub max_len: usize,
    /// Defaults to the backend's special-token count.
    pub n_special: Option<usize>,
    pub head_fraction: Option<f64>,
    pub preset: Option<TruncationPreset>,
}

impl Default for TruncationSection {
    fn default() -> Self {
        Self { max_len: 512, n_special: None, head_fraction: None, preset: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImbalanceSection {
    pub strategy: ImbalanceStrategy,
}

impl Default for ImbalanceSection {
    fn default() -> Self {
        Self { strategy: TrialConfig::default().imbalance_strategy }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    /// `"reference"` starts from the 48-point reference grid.
    pub preset: Option<String>,
    /// Axes added to, or replacing those of, the preset.
    pub axes: Grid,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleSection {
    pub spec: Option<PathBuf>,
}

impl Config {
    /// Read `path` (if any), apply `key=value` overrides, and validate.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
                text.parse::<toml::Table>().with_context(|| format!("parsing config {}", p.display()))?
            }
            None => toml::Table::new(),
        };
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        if let Some(trainer) = table.get("trainer").and_then(toml::Value::as_table) {
            for key in ["truncation", "imbalance_strategy"] {
                if trainer.contains_key(key) {
                    bail!("set trainer.{key} through the [truncation] / [imbalance] sections");
                }
            }
        }
        let config: Config = toml::Value::Table(table).try_into().context("invalid configuration")?;
        if config.truncation.preset.is_some() && config.truncation.head_fraction.is_some() {
            bail!("set either truncation.preset or truncation.head_fraction, not both");
        }
        Ok(config)
    }

    pub fn backend(&self) -> Result<Box<dyn EncoderBackend>> {
        self.backend.build().context("building backend")
    }

    pub fn model_id(&self, backend: &dyn EncoderBackend) -> String {
        self.run.model_id.clone().unwrap_or_else(|| backend.id())
    }

    /// Fully resolved trial configuration for `backend`.
    pub fn trial_config(&self, backend: &dyn EncoderBackend) -> Result<TrialConfig> {
        let t = &self.truncation;
        let head_fraction = match (t.preset, t.head_fraction) {
            (Some(p), _) => p.head_fraction(),
            (None, Some(f)) => f,
            (None, None) => TokenBudgetPlan::default().head_fraction,
        };
        let n_special = t.n_special.unwrap_or_else(|| backend.n_special());
        let plan = TokenBudgetPlan::new(t.max_len, n_special, head_fraction).context("invalid [truncation]")?;
        let config =
            TrialConfig { truncation: plan, imbalance_strategy: self.imbalance.strategy, ..self.trainer.clone() };
        config.validate().context("invalid [trainer]")?;
        Ok(config)
    }

    pub fn grid(&self) -> Result<Grid> {
        let mut grid = match self.grid.preset.as_deref() {
            None => Grid::default(),
            Some("reference") => Grid::reference(),
            Some(other) => bail!("unknown grid preset {other:?}; expected \"reference\""),
        };
        for (key, values) in &self.grid.axes.0 {
            grid.0.insert(*key, values.clone());
        }
        Ok(grid)
    }

    pub fn require_train(&self) -> Result<&Path> {
        self.data.train.as_deref().context("data.train is not set")
    }
}

/// Set a dotted key in a TOML table, creating intermediate tables.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment.split_once('=').with_context(|| format!("override {assignment:?} is not key=value"))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        bail!("bad override key {key:?}");
    }
    let value = parse_value(raw.trim());
    let (last, parents) = parts.split_last().expect("non-empty");
    let mut cur = table;
    for p in parents {
        let entry = cur.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry.as_table_mut().with_context(|| format!("override {key:?}: {p:?} is not a table"))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

fn parse_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}
