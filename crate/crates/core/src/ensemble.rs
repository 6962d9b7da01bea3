//! Prediction ensembles over per-(model, fold) logits.
//!
//! Four combinators are provided: mean of raw logits, mean of softmax
//! distributions, plurality voting, and "regression mean" (average the
//! members' argmax labels as integers, round half up). All ties break
//! toward the more severe label.
//!
//! An [`EnsembleSpec`] applies one combinator across all selected members,
//! or two in sequence: the first within each model's group of records, the
//! second across the per-model results. Stage-one results enter stage two
//! as one-hot vectors, so every combinator is valid in either position.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::artifacts::{write_atomic, ArtifactError};
use crate::imbalance::softmax;
use crate::label::{argmax_severity, Severity, UnknownLabel, NUM_CLASSES};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EnsembleError {
    #[error("no records to combine")]
    Empty,
    #[error("expected {expected} logits, found {found}")]
    WrongArity { expected: usize, found: usize },
    #[error("non-finite logits {0:?}")]
    NonFinite(Vec<f64>),
    #[error("ensemble spec has no members")]
    NoMembers,
    #[error("ensemble spec has {0} stages; at most 2 are supported")]
    TooManyStages(usize),
    #[error("spec must give exactly one of `kind` or `stages`")]
    AmbiguousKind,
    #[error("no prediction records for model(s): {}", .0.join(", "))]
    MissingModels(Vec<String>),
    #[error("missing prediction records: {}", format_gaps(.0))]
    MissingRecords(Vec<RecordGap>),
    #[error("duplicate record for example {example_id:?}, model {model_id:?}, fold {fold}")]
    DuplicateRecord { example_id: String, model_id: String, fold: usize },
}

/// A (member, example) pair with no record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordGap {
    pub example_id: String,
    pub model_id: String,
    pub fold: Option<usize>,
}

impl fmt::Display for RecordGap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.fold {
            Some(fold) => write!(f, "{}@{}/fold{}", self.example_id, self.model_id, fold),
            None => write!(f, "{}@{}", self.example_id, self.model_id),
        }
    }
}

fn format_gaps(gaps: &[RecordGap]) -> String {
    const SHOWN: usize = 20;
    let mut s = gaps.iter().take(SHOWN).map(|g| g.to_string()).collect::<Vec<_>>().join(", ");
    if gaps.len() > SHOWN {
        s.push_str(&format!(" ... and {} more", gaps.len() - SHOWN));
    }
    s
}

/// Raw classifier output for one example from one (model, fold) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub example_id: String,
    pub model_id: String,
    pub fold: usize,
    pub logits: Vec<f64>,
}

impl PredictionRecord {
    pub fn label(&self) -> usize {
        argmax_severity(&self.logits)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Combinator {
    LogitsMean,
    SoftmaxMean,
    Voting,
    RegressionMean,
}

impl Combinator {
    pub const ALL: [Combinator; 4] =
        [Combinator::LogitsMean, Combinator::SoftmaxMean, Combinator::Voting, Combinator::RegressionMean];

    pub fn name(self) -> &'static str {
        match self {
            Combinator::LogitsMean => "logits_mean",
            Combinator::SoftmaxMean => "softmax_mean",
            Combinator::Voting => "voting",
            Combinator::RegressionMean => "regression_mean",
        }
    }

    pub fn combine(self, members: &[&[f64]]) -> Result<usize, EnsembleError> {
        match self {
            Combinator::LogitsMean => combine_logits_mean(members),
            Combinator::SoftmaxMean => combine_softmax_mean(members),
            Combinator::Voting => combine_voting(members),
            Combinator::RegressionMean => combine_regression_mean(members),
        }
    }
}

impl fmt::Display for Combinator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Combinator {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown combinator {s:?}"))
    }
}

fn validate(members: &[&[f64]]) -> Result<(), EnsembleError> {
    if members.is_empty() {
        return Err(EnsembleError::Empty);
    }
    for m in members {
        if m.len() != NUM_CLASSES {
            return Err(EnsembleError::WrongArity { expected: NUM_CLASSES, found: m.len() });
        }
        if m.iter().any(|x| !x.is_finite()) {
            return Err(EnsembleError::NonFinite(m.to_vec()));
        }
    }
    Ok(())
}

fn elementwise_mean<I: Iterator<Item = Vec<f64>>>(rows: I, n: usize) -> Vec<f64> {
    let mut acc = vec![0.0; NUM_CLASSES];
    for row in rows {
        for (a, x) in acc.iter_mut().zip(row) {
            *a += x;
        }
    }
    acc.iter_mut().for_each(|a| *a /= n as f64);
    acc
}

/// Argmax of the elementwise mean of logits.
pub fn combine_logits_mean(members: &[&[f64]]) -> Result<usize, EnsembleError> {
    validate(members)?;
    let mean = elementwise_mean(members.iter().map(|m| m.to_vec()), members.len());
    Ok(argmax_severity(&mean))
}

/// Mean of the members' softmax distributions.
pub fn mean_softmax(members: &[&[f64]]) -> Result<Vec<f64>, EnsembleError> {
    validate(members)?;
    Ok(elementwise_mean(members.iter().map(|m| softmax(m)), members.len()))
}

/// Probabilities closer than this count as tied: summing the same terms in a
/// different order can separate exact ties by a few ulps.
const PROB_TIE_TOL: f64 = 1e-12;

pub fn combine_softmax_mean(members: &[&[f64]]) -> Result<usize, EnsembleError> {
    let mean = mean_softmax(members)?;
    let max = mean.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(mean.iter().rposition(|&p| p >= max - PROB_TIE_TOL).expect("non-empty"))
}

/// Plurality of per-member argmax labels.
pub fn combine_voting(members: &[&[f64]]) -> Result<usize, EnsembleError> {
    validate(members)?;
    let mut votes = [0.0f64; NUM_CLASSES];
    for m in members {
        votes[argmax_severity(m)] += 1.0;
    }
    Ok(argmax_severity(&votes))
}

/// Members' argmax labels averaged as integers, rounded half up, clamped.
pub fn combine_regression_mean(members: &[&[f64]]) -> Result<usize, EnsembleError> {
    validate(members)?;
    let n = members.len();
    let sum: usize = members.iter().map(|m| argmax_severity(m)).sum();
    // floor(sum / n + 1/2) in integers
    let rounded = (2 * sum + n) / (2 * n);
    Ok(rounded.min(NUM_CLASSES - 1))
}

fn one_hot(label: usize) -> Vec<f64> {
    let mut v = vec![0.0; NUM_CLASSES];
    v[label] = 1.0;
    v
}

/// Which records an ensemble member draws from. `fold: None` selects every
/// record of the model for an example (at least one must exist).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MemberSelector {
    pub model_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fold: Option<usize>,
}

impl MemberSelector {
    pub fn new(model_id: impl Into<String>, fold: Option<usize>) -> Self {
        Self { model_id: model_id.into(), fold }
    }

    fn matches(&self, record: &PredictionRecord) -> bool {
        record.model_id == self.model_id && self.fold.map_or(true, |f| f == record.fold)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stages {
    Flat(Combinator),
    /// `per_model` within each model's records, then `across_models` over the results.
    Hierarchical { per_model: Combinator, across_models: Combinator },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawSpec", into = "RawSpec")]
pub struct EnsembleSpec {
    pub name: Option<String>,
    pub members: Vec<MemberSelector>,
    pub stages: Stages,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    kind: Option<Combinator>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    stages: Option<Vec<Combinator>>,
    members: Vec<MemberSelector>,
}

impl TryFrom<RawSpec> for EnsembleSpec {
    type Error = EnsembleError;

    fn try_from(raw: RawSpec) -> Result<Self, Self::Error> {
        let stages = match (raw.kind, raw.stages.as_deref()) {
            (Some(kind), None) => Stages::Flat(kind),
            (None, Some([kind])) => Stages::Flat(*kind),
            (None, Some([per_model, across_models])) => {
                Stages::Hierarchical { per_model: *per_model, across_models: *across_models }
            }
            (None, Some(s)) if s.len() > 2 => return Err(EnsembleError::TooManyStages(s.len())),
            _ => return Err(EnsembleError::AmbiguousKind),
        };
        EnsembleSpec::new(raw.name, raw.members, stages)
    }
}

impl From<EnsembleSpec> for RawSpec {
    fn from(spec: EnsembleSpec) -> Self {
        let (kind, stages) = match spec.stages {
            Stages::Flat(k) => (Some(k), None),
            Stages::Hierarchical { per_model, across_models } => (None, Some(vec![per_model, across_models])),
        };
        RawSpec { name: spec.name, kind, stages, members: spec.members }
    }
}

impl EnsembleSpec {
    pub fn new(name: Option<String>, members: Vec<MemberSelector>, stages: Stages) -> Result<Self, EnsembleError> {
        if members.is_empty() {
            return Err(EnsembleError::NoMembers);
        }
        Ok(Self { name, members, stages })
    }

    pub fn flat(kind: Combinator, members: Vec<MemberSelector>) -> Result<Self, EnsembleError> {
        Self::new(None, members, Stages::Flat(kind))
    }

    /// Regression mean over one model's fold models.
    pub fn best_model_4_mean(model_id: &str, folds: usize) -> Self {
        let members = (0..folds).map(|f| MemberSelector::new(model_id, Some(f))).collect();
        Self { name: Some("BestModel4Mean".into()), members, stages: Stages::Flat(Combinator::RegressionMean) }
    }

    /// Regression mean within each model's folds, then voting across models.
    pub fn kfold_mean_9_mode(model_ids: &[&str], folds: usize) -> Self {
        Self {
            name: Some("KFoldMean9Mode".into()),
            members: all_members(model_ids, folds),
            stages: Stages::Hierarchical { per_model: Combinator::RegressionMean, across_models: Combinator::Voting },
        }
    }

    /// One flat vote over every (model, fold) output.
    pub fn all_36_mode(model_ids: &[&str], folds: usize) -> Self {
        Self { name: Some("All36Mode".into()), members: all_members(model_ids, folds), stages: Stages::Flat(Combinator::Voting) }
    }

    /// Same members and structure with every stage replaced by `kind`.
    pub fn with_kind(&self, kind: Combinator) -> Self {
        let stages = match self.stages {
            Stages::Flat(_) => Stages::Flat(kind),
            Stages::Hierarchical { .. } => Stages::Hierarchical { per_model: kind, across_models: kind },
        };
        Self { name: self.name.clone(), members: self.members.clone(), stages }
    }
}

fn all_members(model_ids: &[&str], folds: usize) -> Vec<MemberSelector> {
    model_ids
        .iter()
        .flat_map(|m| (0..folds).map(move |f| MemberSelector::new(*m, Some(f))))
        .collect()
}

/// Apply `spec` to every example that has records from the spec's models.
/// Output follows the first-appearance order of example ids in `records`.
pub fn run_ensemble(spec: &EnsembleSpec, records: &[PredictionRecord]) -> Result<IndexMap<String, usize>, EnsembleError> {
    let models: HashSet<&str> = spec.members.iter().map(|m| m.model_id.as_str()).collect();
    let present: HashSet<&str> = records.iter().map(|r| r.model_id.as_str()).collect();
    let mut reported = HashSet::new();
    let missing_models: Vec<String> = spec
        .members
        .iter()
        .map(|m| m.model_id.as_str())
        .filter(|m| !present.contains(m) && reported.insert(*m))
        .map(str::to_string)
        .collect();
    if !missing_models.is_empty() {
        return Err(EnsembleError::MissingModels(missing_models));
    }

    let mut by_example: IndexMap<&str, Vec<&PredictionRecord>> = IndexMap::new();
    let mut seen: HashSet<(&str, &str, usize)> = HashSet::new();
    for r in records.iter().filter(|r| models.contains(r.model_id.as_str())) {
        if !seen.insert((&r.example_id, &r.model_id, r.fold)) {
            return Err(EnsembleError::DuplicateRecord {
                example_id: r.example_id.clone(),
                model_id: r.model_id.clone(),
                fold: r.fold,
            });
        }
        by_example.entry(&r.example_id).or_default().push(r);
    }

    let mut gaps = Vec::new();
    let mut selected: Vec<(&str, Vec<&PredictionRecord>)> = Vec::with_capacity(by_example.len());
    for (example_id, recs) in &by_example {
        let mut chosen = Vec::new();
        for member in &spec.members {
            let before = chosen.len();
            chosen.extend(recs.iter().copied().filter(|r| member.matches(r)));
            if chosen.len() == before {
                gaps.push(RecordGap {
                    example_id: example_id.to_string(),
                    model_id: member.model_id.clone(),
                    fold: member.fold,
                });
            }
        }
        selected.push((example_id, chosen));
    }
    if !gaps.is_empty() {
        return Err(EnsembleError::MissingRecords(gaps));
    }

    let mut out = IndexMap::with_capacity(selected.len());
    for (example_id, chosen) in selected {
        // overlapping selectors must not double-count a record
        let mut uniq: Vec<&PredictionRecord> = Vec::with_capacity(chosen.len());
        for r in chosen {
            if !uniq.iter().any(|u| std::ptr::eq(*u, r)) {
                uniq.push(r);
            }
        }
        let label = match spec.stages {
            Stages::Flat(kind) => {
                let logits: Vec<&[f64]> = uniq.iter().map(|r| r.logits.as_slice()).collect();
                kind.combine(&logits)?
            }
            Stages::Hierarchical { per_model, across_models } => {
                let mut groups: IndexMap<&str, Vec<&[f64]>> = IndexMap::new();
                for r in &uniq {
                    groups.entry(r.model_id.as_str()).or_default().push(&r.logits);
                }
                let hot: Vec<Vec<f64>> = groups
                    .values()
                    .map(|g| per_model.combine(g).map(one_hot))
                    .collect::<Result<_, _>>()?;
                let refs: Vec<&[f64]> = hot.iter().map(Vec::as_slice).collect();
                across_models.combine(&refs)?
            }
        };
        out.insert(example_id.to_string(), label);
    }
    Ok(out)
}

/// Distinct model ids in first-appearance order.
pub fn model_ids(records: &[PredictionRecord]) -> Vec<String> {
    let mut seen = HashSet::new();
    records
        .iter()
        .filter(|r| seen.insert(r.model_id.as_str()))
        .map(|r| r.model_id.clone())
        .collect()
}

#[derive(Debug, thiserror::Error)]
pub enum SubmissionError {
    #[error("{path}:{line}: {message}")]
    Malformed { path: String, line: u64, message: String },
    #[error("{path}:{line}: {source}")]
    Label { path: String, line: u64, source: UnknownLabel },
    #[error("{path}:{line}: duplicate pid {id:?}")]
    DuplicateId { path: String, line: u64, id: String },
    #[error("label index {0} out of range")]
    LabelIndex(usize),
    #[error(transparent)]
    Artifact(#[from] ArtifactError),
}

/// `pid,label` rows with label names, in map order.
pub fn submission_csv(labels: &IndexMap<String, usize>) -> Result<Vec<u8>, SubmissionError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["pid", "label"]).expect("in-memory write");
    for (id, &label) in labels {
        let name = Severity::from_index(label).ok_or(SubmissionError::LabelIndex(label))?.as_str();
        w.write_record([id.as_str(), name]).expect("in-memory write");
    }
    Ok(w.into_inner().expect("in-memory flush"))
}

pub fn save_submission(path: &Path, labels: &IndexMap<String, usize>) -> Result<(), SubmissionError> {
    Ok(write_atomic(path, &submission_csv(labels)?)?)
}

pub fn load_submission(path: &Path) -> Result<IndexMap<String, Severity>, SubmissionError> {
    let display = path.display().to_string();
    let malformed = |line: u64, message: String| SubmissionError::Malformed { path: display.clone(), line, message };
    let mut reader = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(source) => SubmissionError::Artifact(ArtifactError::Io { path: display.clone(), source }),
        other => malformed(0, format!("{other:?}")),
    })?;
    let mut out = IndexMap::new();
    for row in reader.records() {
        let row = row.map_err(|e| malformed(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = row.position().map_or(0, |p| p.line());
        if row.len() != 2 {
            return Err(malformed(line, format!("expected 2 fields, found {}", row.len())));
        }
        let label = row[1].parse().map_err(|source| SubmissionError::Label { path: display.clone(), line, source })?;
        if out.insert(row[0].to_string(), label).is_some() {
            return Err(SubmissionError::DuplicateId { path: display.clone(), line, id: row[0].to_string() });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(example: &str, model: &str, fold: usize, logits: [f64; 3]) -> PredictionRecord {
        PredictionRecord { example_id: example.into(), model_id: model.into(), fold, logits: logits.to_vec() }
    }

    fn labels(ls: &[usize]) -> Vec<Vec<f64>> {
        ls.iter().map(|&l| one_hot(l)).collect()
    }

    fn refs(v: &[Vec<f64>]) -> Vec<&[f64]> {
        v.iter().map(Vec::as_slice).collect()
    }

    #[test]
    fn logits_mean_examples() {
        assert_eq!(combine_logits_mean(&[&[1.0, 5.0, 2.0]]).unwrap(), 1);
        assert_eq!(combine_logits_mean(&[&[4.0, 1.0, 0.0], &[1.0, 3.0, 0.0]]).unwrap(), 0);
        assert_eq!(combine_logits_mean(&[&[2.0, 0.0, 0.0], &[0.0, 2.0, 0.0]]).unwrap(), 1);
    }

    #[test]
    fn softmax_mean_diverges_from_voting() {
        let m: [&[f64]; 3] = [&[0.0, 10.0, 0.0], &[1.0, 0.0, 0.0], &[1.0, 0.0, 0.0]];
        let dist = mean_softmax(&m).unwrap();
        assert!((dist[0] - 0.384).abs() < 1e-3 && (dist[1] - 0.475).abs() < 1e-3 && (dist[2] - 0.141).abs() < 1e-3);
        assert!((dist.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert_eq!(combine_softmax_mean(&m).unwrap(), 1);
        assert_eq!(combine_voting(&m).unwrap(), 0);
    }

    #[test]
    fn voting_examples() {
        assert_eq!(combine_voting(&refs(&labels(&[1, 1, 2]))).unwrap(), 1);
        assert_eq!(combine_voting(&refs(&labels(&[0, 0, 1, 1]))).unwrap(), 1);
    }

    #[test]
    fn regression_mean_examples() {
        assert_eq!(combine_regression_mean(&refs(&labels(&[0, 1, 1, 2]))).unwrap(), 1);
        assert_eq!(combine_regression_mean(&refs(&labels(&[2, 1]))).unwrap(), 2);
        assert_eq!(combine_regression_mean(&refs(&labels(&[0, 0, 1]))).unwrap(), 0);
    }

    #[test]
    fn combinator_errors() {
        assert_eq!(combine_voting(&[]), Err(EnsembleError::Empty));
        assert_eq!(
            combine_logits_mean(&[&[1.0, 2.0]]),
            Err(EnsembleError::WrongArity { expected: 3, found: 2 })
        );
        assert!(matches!(combine_softmax_mean(&[&[f64::INFINITY, 0.0, 0.0]]), Err(EnsembleError::NonFinite(_))));
    }

    #[test]
    fn best_model_and_hierarchical_specs() {
        let mut records = Vec::new();
        // model a: folds vote 2,1,1,2 -> regression mean 1.5 -> 2
        for (f, l) in [2, 1, 1, 2].into_iter().enumerate() {
            records.push(rec("x", "a", f, one_hot(l).try_into().unwrap()));
        }
        // models b, c: all folds 0
        for m in ["b", "c"] {
            for f in 0..4 {
                records.push(rec("x", m, f, [1.0, 0.0, 0.0]));
            }
        }
        let best = run_ensemble(&EnsembleSpec::best_model_4_mean("a", 4), &records).unwrap();
        assert_eq!(best["x"], 2);
        let hier = run_ensemble(&EnsembleSpec::kfold_mean_9_mode(&["a", "b", "c"], 4), &records).unwrap();
        assert_eq!(hier["x"], 0);
        // flat vote over 12 outputs: 8 zeros
        let all = run_ensemble(&EnsembleSpec::all_36_mode(&["a", "b", "c"], 4), &records).unwrap();
        assert_eq!(all["x"], 0);
    }

    #[test]
    fn absent_model_is_named() {
        let records = vec![rec("x", "a", 0, [0.0, 1.0, 0.0])];
        let spec = EnsembleSpec::flat(Combinator::Voting, vec![MemberSelector::new("ghost", None)]).unwrap();
        let err = run_ensemble(&spec, &records).unwrap_err();
        assert_eq!(err, EnsembleError::MissingModels(vec!["ghost".into()]));
        assert!(err.to_string().contains("ghost"));
    }

    #[test]
    fn gaps_are_listed() {
        let records = vec![
            rec("x", "a", 0, [0.0, 1.0, 0.0]),
            rec("x", "a", 1, [0.0, 1.0, 0.0]),
            rec("y", "a", 0, [0.0, 1.0, 0.0]),
        ];
        let spec = EnsembleSpec::best_model_4_mean("a", 2);
        let err = run_ensemble(&spec, &records).unwrap_err();
        assert_eq!(
            err,
            EnsembleError::MissingRecords(vec![RecordGap { example_id: "y".into(), model_id: "a".into(), fold: Some(1) }])
        );
    }

    #[test]
    fn duplicate_records_rejected() {
        let records = vec![rec("x", "a", 0, [0.0, 1.0, 0.0]), rec("x", "a", 0, [1.0, 0.0, 0.0])];
        let spec = EnsembleSpec::best_model_4_mean("a", 1);
        assert!(matches!(run_ensemble(&spec, &records), Err(EnsembleError::DuplicateRecord { .. })));
    }

    #[test]
    fn wildcard_fold_takes_every_record() {
        let records = vec![rec("x", "a", 0, [0.0, 0.0, 1.0]), rec("y", "a", 3, [1.0, 0.0, 0.0])];
        let spec = EnsembleSpec::flat(Combinator::SoftmaxMean, vec![MemberSelector::new("a", None)]).unwrap();
        let out = run_ensemble(&spec, &records).unwrap();
        assert_eq!(out.into_iter().collect::<Vec<_>>(), vec![("x".to_string(), 2), ("y".to_string(), 0)]);
    }

    #[test]
    fn spec_json_forms() {
        let flat: EnsembleSpec =
            serde_json::from_str(r#"{"name":"b","kind":"regression_mean","members":[{"model_id":"m","fold":0}]}"#).unwrap();
        assert_eq!(flat.stages, Stages::Flat(Combinator::RegressionMean));
        let hier: EnsembleSpec =
            serde_json::from_str(r#"{"stages":["regression_mean","voting"],"members":[{"model_id":"m"}]}"#).unwrap();
        assert_eq!(
            hier.stages,
            Stages::Hierarchical { per_model: Combinator::RegressionMean, across_models: Combinator::Voting }
        );
        let back: EnsembleSpec = serde_json::from_str(&serde_json::to_string(&hier).unwrap()).unwrap();
        assert_eq!(back, hier);
        assert!(serde_json::from_str::<EnsembleSpec>(r#"{"kind":"voting","members":[]}"#).is_err());
        assert!(serde_json::from_str::<EnsembleSpec>(r#"{"kind":"voting","stages":["voting"],"members":[{"model_id":"m"}]}"#).is_err());
        assert!(serde_json::from_str::<EnsembleSpec>(
            r#"{"stages":["voting","voting","voting"],"members":[{"model_id":"m"}]}"#
        )
        .is_err());
    }

    #[test]
    fn submission_round_trip() {
        let labels: IndexMap<String, usize> = [("b".to_string(), 2), ("a".to_string(), 0)].into_iter().collect();
        let bytes = submission_csv(&labels).unwrap();
        assert_eq!(String::from_utf8(bytes).unwrap(), "pid,label\nb,severe\na,not depression\n");
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub.csv");
        save_submission(&p, &labels).unwrap();
        let back = load_submission(&p).unwrap();
        assert_eq!(back.keys().collect::<Vec<_>>(), ["b", "a"]);
        assert_eq!(back["b"], Severity::Severe);
        std::fs::write(&p, "pid,label\nx,awful\n").unwrap();
        assert!(matches!(load_submission(&p), Err(SubmissionError::Label { line: 2, .. })));
    }

    #[test]
    fn softmax_mean_ties_survive_summation_order() {
        // classes 0 and 1 receive the same three probabilities in different orders
        let a = [0.0, 1.0, 3.0];
        let b = [3.0, 0.0, 1.0];
        let c = [1.0, 3.0, 0.0];
        let m = [&a[..], &b[..], &c[..]];
        assert_eq!(combine_softmax_mean(&m).unwrap(), 2);
        assert_eq!(combine_softmax_mean(&[&[2.0, 2.0, 0.0][..], &[0.0, 0.0, 0.0][..]]).unwrap(), 1);
    }
}
