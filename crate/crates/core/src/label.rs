//! Ordinal severity labels.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Number of severity classes.
pub const NUM_CLASSES: usize = 3;

/// Depression severity, ordered by increasing clinical severity.
///
/// The discriminant is the ordinal used everywhere a label is treated as a
/// number (loss targets, regression-mean ensembling, fold stratification).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    NotDepressed = 0,
    Moderate = 1,
    Severe = 2,
}

/// Accepted spellings, matched case-insensitively after whitespace collapse.
const ALIASES: &[(&str, Severity)] = &[
    ("not depression", Severity::NotDepressed),
    ("not depressed", Severity::NotDepressed),
    ("not", Severity::NotDepressed),
    ("moderate", Severity::Moderate),
    ("moderately", Severity::Moderate),
    ("moderately depressed", Severity::Moderate),
    ("severe", Severity::Severe),
    ("severely", Severity::Severe),
    ("severely depressed", Severity::Severe),
];

impl Severity {
    pub const ALL: [Severity; NUM_CLASSES] =
        [Severity::NotDepressed, Severity::Moderate, Severity::Severe];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    /// Canonical label string used in submission files.
    pub fn as_str(self) -> &'static str {
        match self {
            Severity::NotDepressed => "not depression",
            Severity::Moderate => "moderate",
            Severity::Severe => "severe",
        }
    }

    /// Comma-separated list of accepted label spellings, for error messages.
    pub fn accepted_labels() -> String {
        ALIASES
            .iter()
            .map(|(alias, _)| format!("{alias:?}"))
            .collect::<Vec<_>>()
            .join(", ")
    }
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown label {label:?}; accepted labels are {}", Severity::accepted_labels())]
pub struct UnknownLabel {
    pub label: String,
}

impl FromStr for Severity {
    type Err = UnknownLabel;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase();
        if let Some((_, sev)) = ALIASES.iter().find(|(alias, _)| *alias == key) {
            return Ok(*sev);
        }
        // numeric ordinals are accepted as-is
        match key.as_str() {
            "0" => Ok(Severity::NotDepressed),
            "1" => Ok(Severity::Moderate),
            "2" => Ok(Severity::Severe),
            _ => Err(UnknownLabel { label: s.to_string() }),
        }
    }
}

/// Index of the largest value; ties go to the higher index (greater severity).
///
/// Panics on an empty slice.
pub fn argmax_severity(values: &[f64]) -> usize {
    assert!(!values.is_empty(), "argmax of empty slice");
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v >= values[best] {
            best = i;
        }
    }
    best
}
