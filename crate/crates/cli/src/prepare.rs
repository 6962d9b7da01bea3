use std::collections::HashMap;

use anyhow::{Context, Result};
use depscreen_core::artifacts::{write_atomic, write_json};
use depscreen_core::dataset::{normalize_text, stratified_kfold, Dataset};
use depscreen_core::manifest::RunManifest;
use serde::Serialize;

use crate::config::Config;
use crate::report::{create_dir, label_table, load_splits};

#[derive(Debug, Serialize)]
struct DuplicatePair {
    id: String,
    duplicate_of: String,
}

#[derive(Debug, Serialize)]
struct DuplicateReport {
    /// Examples whose normalized text appeared earlier in train+dev.
    count: usize,
    removed: bool,
    pairs: Vec<DuplicatePair>,
}

fn duplicate_pairs(dataset: &Dataset) -> Vec<DuplicatePair> {
    let mut first: HashMap<String, &str> = HashMap::new();
    let mut pairs = Vec::new();
    for ex in dataset.examples() {
        match first.get(&normalize_text(&ex.text)) {
            Some(orig) => pairs.push(DuplicatePair { id: ex.id.clone(), duplicate_of: orig.to_string() }),
            None => {
                first.insert(normalize_text(&ex.text), &ex.id);
            }
        }
    }
    pairs
}

pub fn run(config: &Config) -> Result<()> {
    let splits = load_splits(config)?;
    let dir = &config.run.dir;
    create_dir(dir)?;

    let parts: Vec<&Dataset> = std::iter::once(&splits.train).chain(splits.dev.as_ref()).collect();
    let raw_combined = Dataset::concat(&parts)?;
    let pairs = duplicate_pairs(&raw_combined);
    let duplicates = DuplicateReport { count: pairs.len(), removed: config.data.dedup, pairs };

    let folds = stratified_kfold(&splits.combined, config.folds.k, config.folds.seed).context("folding train+dev")?;

    let mut columns = vec![("Train", &splits.train)];
    if let Some(dev) = &splits.dev {
        columns.push(("Dev", dev));
    }
    columns.push(("Combined", &splits.combined));
    let mut table = label_table(&columns);
    table.push_str("\nPer fold:\n\n");
    let fold_sets: Vec<(String, Dataset)> = (0..folds.k)
        .map(|i| (format!("Fold {i}"), splits.combined.select(&folds.split_indices(&splits.combined, i).1, splits.combined.split())))
        .collect();
    let fold_columns: Vec<(&str, &Dataset)> = fold_sets.iter().map(|(n, d)| (n.as_str(), d)).collect();
    table.push_str(&label_table(&fold_columns));

    let folds_path = dir.join("folds.csv");
    let table_path = dir.join("label_distribution.md");
    let dup_path = dir.join("duplicates.json");
    folds.save(&folds_path)?;
    write_atomic(&table_path, table.as_bytes())?;
    write_json(&dup_path, &duplicates)?;

    let backend = config.backend()?;
    let mut manifest = RunManifest::new(serde_json::to_value(config)?, backend.id());
    manifest.add_dataset("train", config.require_train()?)?;
    if let Some(dev) = &config.data.dev {
        manifest.add_dataset("dev", dev)?;
    }
    manifest.fold_seed = Some(config.folds.seed);
    manifest.add_artifact("folds", &folds_path);
    manifest.add_artifact("label_distribution", &table_path);
    manifest.add_artifact("duplicates", &dup_path);
    manifest.save(&dir.join("manifest.json"))?;

    print!("{table}");
    println!(
        "\n{} examples in {} folds (sizes {:?}); {} duplicate texts{}",
        splits.combined.len(),
        folds.k,
        folds.fold_sizes(),
        duplicates.count,
        if config.data.dedup { format!(", {} removed", splits.duplicates_removed) } else { String::new() }
    );
    println!("wrote {}", folds_path.display());
    Ok(())
}
