//! Labeled task data: loading, validation, deduplication and stratified
//! cross-validation folds.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io;
use std::path::Path;
use std::str::FromStr;

use indexmap::IndexMap;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::artifacts::{write_atomic, ArtifactError};
use crate::label::{Severity, NUM_CLASSES};

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("{path}: missing column {column:?} in header")]
    MissingColumn { path: String, column: &'static str },
    #[error("{path}:{line}: malformed row: {message}")]
    Malformed { path: String, line: u64, message: String },
    #[error("{path}:{line}: empty text")]
    EmptyText { path: String, line: u64 },
    #[error("{path}:{line}: {source}")]
    Label { path: String, line: u64, source: crate::label::UnknownLabel },
    #[error("duplicate id {id:?}")]
    DuplicateId { id: String },
    #[error("example {id:?} has empty text")]
    EmptyExample { id: String },
    #[error("k must be at least 2, got {k}")]
    TooFewFolds { k: usize },
    #[error("class {class:?} has {count} members, fewer than k = {k}")]
    ClassTooSmall { class: Severity, count: usize, k: usize },
    #[error(transparent)]
    Artifact(#[from] ArtifactError),
}

/// One post with its ordinal severity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub id: String,
    pub text: String,
    pub label: Severity,
}

impl LabeledExample {
    pub fn new(id: impl Into<String>, text: impl Into<String>, label: Severity) -> Self {
        Self { id: id.into(), text: text.into(), label }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitTag {
    Train,
    Dev,
    Combined,
    Test,
}

impl fmt::Display for SplitTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SplitTag::Train => "train",
            SplitTag::Dev => "dev",
            SplitTag::Combined => "combined",
            SplitTag::Test => "test",
        })
    }
}

impl FromStr for SplitTag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(SplitTag::Train),
            "dev" => Ok(SplitTag::Dev),
            "combined" => Ok(SplitTag::Combined),
            "test" => Ok(SplitTag::Test),
            other => Err(format!("unknown split {other:?}")),
        }
    }
}

/// Per-label example counts, indexed by ordinal.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelCounts(pub [usize; NUM_CLASSES]);

impl LabelCounts {
    pub fn get(&self, label: Severity) -> usize {
        self.0[label.index()]
    }

    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    /// Share of `label` in percent; 0 for an empty dataset.
    pub fn percent(&self, label: Severity) -> f64 {
        let total = self.total();
        if total == 0 {
            0.0
        } else {
            100.0 * self.get(label) as f64 / total as f64
        }
    }
}

/// An ordered, validated collection of examples.
///
/// Ids are unique for every dataset built through [`Dataset::new`] or the
/// loader. Resampled training sets produced by oversampling are the one
/// exception: they may repeat rows verbatim (see [`Dataset::resampled`]).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    examples: Vec<LabeledExample>,
    split: SplitTag,
}

impl Dataset {
    pub fn new(examples: Vec<LabeledExample>, split: SplitTag) -> Result<Self, DatasetError> {
        let mut seen = HashSet::with_capacity(examples.len());
        for ex in &examples {
            if ex.text.trim().is_empty() {
                return Err(DatasetError::EmptyExample { id: ex.id.clone() });
            }
            if !seen.insert(ex.id.as_str()) {
                return Err(DatasetError::DuplicateId { id: ex.id.clone() });
            }
        }
        Ok(Self { examples, split })
    }

    /// Build a training multiset whose rows may repeat. Only used for
    /// resampling strategies; no id uniqueness check.
    pub fn resampled(examples: Vec<LabeledExample>, split: SplitTag) -> Self {
        Self { examples, split }
    }

    pub fn empty(split: SplitTag) -> Self {
        Self { examples: Vec::new(), split }
    }

    pub fn examples(&self) -> &[LabeledExample] {
        &self.examples
    }

    pub fn into_examples(self) -> Vec<LabeledExample> {
        self.examples
    }

    pub fn split(&self) -> SplitTag {
        self.split
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.examples.iter().map(|e| e.label.index()).collect()
    }

    /// Concatenate several datasets into one `combined` split. Ids must stay unique.
    pub fn concat(parts: &[&Dataset]) -> Result<Self, DatasetError> {
        let examples = parts.iter().flat_map(|d| d.examples.iter().cloned()).collect();
        Dataset::new(examples, SplitTag::Combined)
    }

    /// Sub-dataset of the examples at `indices`, in the order given.
    pub fn select(&self, indices: &[usize], split: SplitTag) -> Self {
        Self { examples: indices.iter().map(|&i| self.examples[i].clone()).collect(), split }
    }
}

/// Count examples per label.
pub fn label_counts(dataset: &Dataset) -> LabelCounts {
    let mut counts = [0usize; NUM_CLASSES];
    for ex in dataset.examples() {
        counts[ex.label.index()] += 1;
    }
    LabelCounts(counts)
}

fn find_column(headers: &csv::StringRecord, names: &[&str]) -> Option<usize> {
    headers.iter().position(|h| {
        let h = h.trim().to_lowercase();
        names.iter().any(|n| *n == h)
    })
}

/// Load a `pid,text,label` file. Tab-separated input is detected from the header line.
pub fn load_dataset(path: &Path, split: SplitTag) -> Result<Dataset, DatasetError> {
    let display = path.display().to_string();
    let bytes = std::fs::read(path).map_err(|source| DatasetError::Io { path: display.clone(), source })?;
    let first_line = bytes.split(|&b| b == b'\n').next().unwrap_or_default();
    let delimiter = if first_line.contains(&b'\t') { b'\t' } else { b',' };

    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(true)
        .from_reader(bytes.as_slice());
    let headers = reader
        .headers()
        .map_err(|e| DatasetError::Malformed { path: display.clone(), line: 1, message: e.to_string() })?
        .clone();
    let id_col = find_column(&headers, &["pid", "id"])
        .ok_or(DatasetError::MissingColumn { path: display.clone(), column: "pid" })?;
    let text_col = find_column(&headers, &["text", "text data", "text_data"])
        .ok_or(DatasetError::MissingColumn { path: display.clone(), column: "text" })?;
    let label_col = find_column(&headers, &["label", "class label", "class_label"])
        .ok_or(DatasetError::MissingColumn { path: display.clone(), column: "label" })?;

    let mut examples = Vec::new();
    let mut seen = HashSet::new();
    for row in reader.records() {
        let row = row.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            DatasetError::Malformed { path: display.clone(), line, message: e.to_string() }
        })?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let field = |col: usize| {
            row.get(col).ok_or_else(|| DatasetError::Malformed {
                path: display.clone(),
                line,
                message: format!("expected at least {} fields, found {}", col + 1, row.len()),
            })
        };
        let id = field(id_col)?.to_string();
        let text = field(text_col)?.to_string();
        let label_str = field(label_col)?;
        if text.trim().is_empty() {
            return Err(DatasetError::EmptyText { path: display.clone(), line });
        }
        let label = label_str
            .parse::<Severity>()
            .map_err(|source| DatasetError::Label { path: display.clone(), line, source })?;
        if !seen.insert(id.clone()) {
            return Err(DatasetError::Malformed {
                path: display.clone(),
                line,
                message: format!("duplicate pid {id:?}"),
            });
        }
        examples.push(LabeledExample { id, text, label });
    }
    Ok(Dataset { examples, split })
}

/// Serialize to the `pid,text,label` format accepted by [`load_dataset`].
pub fn dataset_to_csv(dataset: &Dataset) -> Vec<u8> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(["pid", "text", "label"]).expect("in-memory write");
    for ex in dataset.examples() {
        writer.write_record([ex.id.as_str(), ex.text.as_str(), ex.label.as_str()]).expect("in-memory write");
    }
    writer.into_inner().expect("in-memory flush")
}

pub fn save_dataset(dataset: &Dataset, path: &Path) -> Result<(), DatasetError> {
    Ok(write_atomic(path, &dataset_to_csv(dataset))?)
}

/// Dedup key: trimmed text with internal whitespace runs collapsed to one space.
pub fn normalize_text(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Drop examples whose normalized text was already seen; the first occurrence survives.
pub fn deduplicate(dataset: &Dataset) -> (Dataset, usize) {
    let mut seen = HashSet::new();
    let mut kept = Vec::with_capacity(dataset.len());
    for ex in dataset.examples() {
        if seen.insert(normalize_text(&ex.text)) {
            kept.push(ex.clone());
        }
    }
    let removed = dataset.len() - kept.len();
    (Dataset { examples: kept, split: dataset.split }, removed)
}

/// Mapping of example id to cross-validation fold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldAssignment {
    pub k: usize,
    /// `None` when loaded from a fold file, which does not carry the seed.
    pub seed: Option<u64>,
    assignment: IndexMap<String, usize>,
}

impl FoldAssignment {
    pub fn new(k: usize, seed: Option<u64>, assignment: IndexMap<String, usize>) -> Self {
        Self { k, seed, assignment }
    }

    pub fn fold_of(&self, id: &str) -> Option<usize> {
        self.assignment.get(id).copied()
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, usize)> {
        self.assignment.iter().map(|(id, &f)| (id.as_str(), f))
    }

    /// Fold sizes, indexed by fold.
    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in self.assignment.values() {
            sizes[f] += 1;
        }
        sizes
    }

    /// Indices into `dataset` of the examples in `fold` (validation) and
    /// of all the others (training), in dataset order.
    pub fn split_indices(&self, dataset: &Dataset, fold: usize) -> (Vec<usize>, Vec<usize>) {
        let mut train = Vec::new();
        let mut valid = Vec::new();
        for (i, ex) in dataset.examples().iter().enumerate() {
            if self.fold_of(&ex.id) == Some(fold) {
                valid.push(i);
            } else {
                train.push(i);
            }
        }
        (train, valid)
    }

    /// `pid,fold` CSV in dataset order.
    pub fn to_csv(&self) -> Vec<u8> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(["pid", "fold"]).expect("in-memory write");
        for (id, fold) in &self.assignment {
            writer.write_record([id.as_str(), &fold.to_string()]).expect("in-memory write");
        }
        writer.into_inner().expect("in-memory flush")
    }

    pub fn save(&self, path: &Path) -> Result<(), DatasetError> {
        Ok(write_atomic(path, &self.to_csv())?)
    }

    pub fn load(path: &Path) -> Result<Self, DatasetError> {
        let display = path.display().to_string();
        let mut reader = csv::Reader::from_path(path).map_err(|e| DatasetError::Malformed {
            path: display.clone(),
            line: 0,
            message: e.to_string(),
        })?;
        let mut assignment = IndexMap::new();
        for row in reader.records() {
            let row = row.map_err(|e| DatasetError::Malformed {
                path: display.clone(),
                line: e.position().map(|p| p.line()).unwrap_or(0),
                message: e.to_string(),
            })?;
            let line = row.position().map(|p| p.line()).unwrap_or(0);
            let malformed = |message: String| DatasetError::Malformed { path: display.clone(), line, message };
            if row.len() != 2 {
                return Err(malformed(format!("expected 2 fields, found {}", row.len())));
            }
            let fold: usize = row[1].trim().parse().map_err(|_| malformed(format!("bad fold {:?}", &row[1])))?;
            if assignment.insert(row[0].to_string(), fold).is_some() {
                return Err(malformed(format!("duplicate pid {:?}", &row[0])));
            }
        }
        let k = assignment.values().max().map_or(0, |m| m + 1);
        Ok(Self { k, seed: None, assignment })
    }
}

/// Seeded stratified k-fold split.
///
/// Each class is shuffled independently and dealt round-robin across the
/// folds, so per-class fold sizes differ by at most one. The starting fold
/// for each class continues where the previous class stopped, which keeps
/// total fold sizes within one of each other as well.
pub fn stratified_kfold(dataset: &Dataset, k: usize, seed: u64) -> Result<FoldAssignment, DatasetError> {
    if k < 2 {
        return Err(DatasetError::TooFewFolds { k });
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); NUM_CLASSES];
    for (i, ex) in dataset.examples().iter().enumerate() {
        by_class[ex.label.index()].push(i);
    }
    for (c, members) in by_class.iter().enumerate() {
        if members.len() < k {
            return Err(DatasetError::ClassTooSmall {
                class: Severity::from_index(c).expect("class index"),
                count: members.len(),
                k,
            });
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold_of = vec![0usize; dataset.len()];
    let mut offset = 0;
    for members in &mut by_class {
        members.shuffle(&mut rng);
        for (j, &idx) in members.iter().enumerate() {
            fold_of[idx] = (offset + j) % k;
        }
        offset = (offset + members.len()) % k;
    }

    let assignment = dataset
        .examples()
        .iter()
        .zip(fold_of)
        .map(|(ex, f)| (ex.id.clone(), f))
        .collect();
    Ok(FoldAssignment { k, seed: Some(seed), assignment })
}

/// Per-fold label counts under `folds`, indexed `[fold][label]`.
pub fn fold_label_counts(dataset: &Dataset, folds: &FoldAssignment) -> Vec<LabelCounts> {
    let mut out = vec![LabelCounts::default(); folds.k];
    let index: HashMap<&str, usize> = folds.iter().collect();
    for ex in dataset.examples() {
        if let Some(&f) = index.get(ex.id.as_str()) {
            out[f].0[ex.label.index()] += 1;
        }
    }
    out
}
