//! Shared loading and formatting helpers.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};
use depscreen_core::dataset::{deduplicate, label_counts, load_dataset, Dataset, SplitTag};
use depscreen_core::label::Severity;
use depscreen_core::metrics::MetricsReport;

use crate::config::Config;

pub struct Splits {
    pub train: Dataset,
    pub dev: Option<Dataset>,
    /// train + dev, deduplicated when `data.dedup` is set.
    pub combined: Dataset,
    pub duplicates_removed: usize,
}

pub fn load_splits(config: &Config) -> Result<Splits> {
    let train = load_dataset(config.require_train()?, SplitTag::Train)?;
    let dev = config.data.dev.as_deref().map(|p| load_dataset(p, SplitTag::Dev)).transpose()?;
    let parts: Vec<&Dataset> = std::iter::once(&train).chain(dev.as_ref()).collect();
    let combined = Dataset::concat(&parts).context("combining train and dev")?;
    let (combined, duplicates_removed) =
        if config.data.dedup { deduplicate(&combined) } else { (combined, 0) };
    Ok(Splits { train, dev, combined, duplicates_removed })
}

pub fn load_test(config: &Config) -> Result<Option<Dataset>> {
    Ok(config.data.test.as_deref().map(|p| load_dataset(p, SplitTag::Test)).transpose()?)
}

pub fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).with_context(|| format!("creating {}", path.display()))
}

/// Label distribution as a markdown table: count and share per split.
pub fn label_table(columns: &[(&str, &Dataset)]) -> String {
    let mut out = String::from("| Label |");
    for (name, _) in columns {
        write!(out, " {name} |").unwrap();
    }
    out.push_str("\n|---|");
    out.push_str(&"---|".repeat(columns.len()));
    out.push('\n');
    let counts: Vec<_> = columns.iter().map(|(_, d)| label_counts(d)).collect();
    for s in Severity::ALL {
        write!(out, "| {} |", s.as_str()).unwrap();
        for c in &counts {
            write!(out, " {} ({:.1}%) |", c.get(s), c.percent(s)).unwrap();
        }
        out.push('\n');
    }
    out.push_str("| total |");
    for c in &counts {
        write!(out, " {} |", c.total()).unwrap();
    }
    out.push('\n');
    out
}

pub fn metrics_summary(report: &MetricsReport) -> String {
    let mut out = format!("macro-F1 {:.4}", report.macro_f1);
    if !report.per_fold.is_empty() {
        let folds: Vec<String> = report.per_fold.iter().map(|f| format!("{f:.4}")).collect();
        write!(out, " | fold mean {:.4} [{}]", report.mean, folds.join(", ")).unwrap();
    }
    for (s, (f1, r)) in Severity::ALL.iter().zip(report.per_class_f1.iter().zip(&report.per_class_recall)) {
        write!(out, "\n  {:<15} F1 {f1:.4}  recall {r:.4}", s.as_str()).unwrap();
    }
    out
}
