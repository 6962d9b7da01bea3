//! Head/tail truncation of token sequences that exceed a model's length budget.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::backend::{BackendError, Tokenizer};

pub type TokenId = u32;

/// Token ids produced by a tokenizer, without special tokens.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSequence(pub Vec<TokenId>);

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[TokenId] {
        &self.0
    }
}

impl From<Vec<TokenId>> for TokenSequence {
    fn from(v: Vec<TokenId>) -> Self {
        Self(v)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PlanError {
    #[error("max_len ({max_len}) must exceed n_special ({n_special})")]
    NoContentBudget { max_len: usize, n_special: usize },
    #[error("head_fraction must lie in [0, 1], got {0}")]
    BadFraction(f64),
}

/// The five named regimens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruncationPreset {
    /// Keep the prefix only.
    Head,
    /// 75% of the budget to the prefix.
    Head75,
    /// Even prefix/suffix split.
    Split50,
    /// 75% of the budget to the suffix.
    Tail75,
    /// Keep the suffix only.
    Tail,
}

impl TruncationPreset {
    pub const ALL: [TruncationPreset; 5] = [
        TruncationPreset::Head,
        TruncationPreset::Head75,
        TruncationPreset::Split50,
        TruncationPreset::Tail75,
        TruncationPreset::Tail,
    ];

    pub fn head_fraction(self) -> f64 {
        match self {
            TruncationPreset::Head => 1.0,
            TruncationPreset::Head75 => 0.75,
            TruncationPreset::Split50 => 0.5,
            TruncationPreset::Tail75 => 0.25,
            TruncationPreset::Tail => 0.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TruncationPreset::Head => "head",
            TruncationPreset::Head75 => "head75",
            TruncationPreset::Split50 => "split50",
            TruncationPreset::Tail75 => "tail75",
            TruncationPreset::Tail => "tail",
        }
    }
}

impl fmt::Display for TruncationPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TruncationPreset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| format!("unknown truncation preset {s:?}; expected one of head, head75, split50, tail75, tail"))
    }
}

/// How a long sequence is cut down to fit the model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TokenBudgetPlan {
    /// Model sequence limit, including special tokens.
    pub max_len: usize,
    /// Slots reserved for begin/end markers.
    pub n_special: usize,
    /// Share of the content budget given to the prefix.
    pub head_fraction: f64,
}

impl Default for TokenBudgetPlan {
    fn default() -> Self {
        Self { max_len: 512, n_special: 2, head_fraction: TruncationPreset::Split50.head_fraction() }
    }
}

impl TokenBudgetPlan {
    pub fn new(max_len: usize, n_special: usize, head_fraction: f64) -> Result<Self, PlanError> {
        let plan = Self { max_len, n_special, head_fraction };
        plan.validate()?;
        Ok(plan)
    }

    pub fn from_preset(preset: TruncationPreset, max_len: usize, n_special: usize) -> Result<Self, PlanError> {
        Self::new(max_len, n_special, preset.head_fraction())
    }

    pub fn validate(&self) -> Result<(), PlanError> {
        if self.max_len <= self.n_special {
            return Err(PlanError::NoContentBudget { max_len: self.max_len, n_special: self.n_special });
        }
        if !(0.0..=1.0).contains(&self.head_fraction) {
            return Err(PlanError::BadFraction(self.head_fraction));
        }
        Ok(())
    }

    /// Content-token budget `max_len - n_special`.
    pub fn budget(&self) -> usize {
        self.max_len - self.n_special
    }

    /// `(head, tail)` token counts used when a sequence exceeds the budget.
    pub fn split(&self) -> (usize, usize) {
        let budget = self.budget();
        let head = ((self.head_fraction * budget as f64).floor() as usize).min(budget);
        (head, budget - head)
    }
}

/// Keep the first `head` and last `budget - head` tokens of an over-budget sequence.
pub fn truncate_ids(tokens: &[TokenId], plan: &TokenBudgetPlan) -> Vec<TokenId> {
    let budget = plan.budget();
    if tokens.len() <= budget {
        return tokens.to_vec();
    }
    let (head, tail) = plan.split();
    let mut out = Vec::with_capacity(budget);
    out.extend_from_slice(&tokens[..head]);
    out.extend_from_slice(&tokens[tokens.len() - tail..]);
    out
}

pub fn truncate(seq: &TokenSequence, plan: &TokenBudgetPlan) -> TokenSequence {
    TokenSequence(truncate_ids(&seq.0, plan))
}

/// Fraction of texts whose token count exceeds the plan's content budget.
///
/// Returns 0 when `texts` is empty.
pub fn over_length_fraction<'a, T, I>(texts: I, tokenizer: &T, plan: &TokenBudgetPlan) -> Result<f64, BackendError>
where
    T: Tokenizer + ?Sized,
    I: IntoIterator<Item = &'a str>,
{
    let budget = plan.budget();
    let mut total = 0usize;
    let mut over = 0usize;
    for text in texts {
        total += 1;
        if tokenizer.tokenize(text)?.len() > budget {
            over += 1;
        }
    }
    Ok(if total == 0 { 0.0 } else { over as f64 / total as f64 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn seq(n: u32) -> Vec<TokenId> {
        (0..n).collect()
    }

    #[test]
    fn tail75_at_512_keeps_128_and_384() {
        let plan = TokenBudgetPlan::new(512, 0, 0.25).unwrap();
        let out = truncate_ids(&seq(600), &plan);
        let mut expected: Vec<u32> = (0..128).collect();
        expected.extend(600 - 384..600);
        assert_eq!(out, expected);
    }

    #[test]
    fn under_budget_unchanged() {
        for f in [0.0, 0.3, 1.0] {
            let plan = TokenBudgetPlan::new(512, 2, f).unwrap();
            assert_eq!(truncate_ids(&seq(400), &plan), seq(400));
        }
    }

    #[test]
    fn special_slots_shrink_budget() {
        let plan = TokenBudgetPlan::new(512, 2, 0.5).unwrap();
        let out = truncate_ids(&seq(600), &plan);
        let mut expected: Vec<u32> = (0..255).collect();
        expected.extend(345..600);
        assert_eq!(out.len(), 510);
        assert_eq!(out, expected);
    }

    #[test]
    fn preset_splits_at_512() {
        let splits: Vec<_> = TruncationPreset::ALL
            .iter()
            .map(|p| TokenBudgetPlan::from_preset(*p, 512, 0).unwrap().split())
            .collect();
        assert_eq!(splits, [(512, 0), (384, 128), (256, 256), (128, 384), (0, 512)]);
    }

    #[test]
    fn invalid_plans_rejected() {
        assert!(matches!(TokenBudgetPlan::new(2, 2, 0.5), Err(PlanError::NoContentBudget { .. })));
        assert!(matches!(TokenBudgetPlan::new(10, 0, 1.5), Err(PlanError::BadFraction(_))));
        assert!(TokenBudgetPlan::new(3, 2, 0.0).is_ok());
    }

    #[test]
    fn preset_names_parse() {
        for p in TruncationPreset::ALL {
            assert_eq!(p.name().parse::<TruncationPreset>().unwrap(), p);
        }
        assert!("middle".parse::<TruncationPreset>().is_err());
    }

    proptest! {
        #[test]
        fn prefix_plus_suffix(len in 0usize..700, max_len in 3usize..600, n_special in 0usize..3, f in 0.0f64..=1.0) {
            let plan = TokenBudgetPlan::new(max_len, n_special, f).unwrap();
            let input: Vec<u32> = (0..len as u32).map(|x| x.wrapping_mul(2654435761)).collect();
            let out = truncate_ids(&input, &plan);
            let budget = max_len - n_special;
            prop_assert_eq!(out.len(), len.min(budget));
            // some split point makes out a prefix ++ suffix of input
            let ok = (0..=out.len()).any(|h| {
                out[..h] == input[..h] && out[h..] == input[input.len() - (out.len() - h)..]
            });
            prop_assert!(ok);
            prop_assert_eq!(truncate_ids(&out, &plan), out.clone());
        }

        #[test]
        fn extremes_match_plain_slicing(len in 0usize..300, max_len in 2usize..200) {
            let input: Vec<u32> = (0..len as u32).collect();
            let head = TokenBudgetPlan::new(max_len, 1, 1.0).unwrap();
            let tail = TokenBudgetPlan::new(max_len, 1, 0.0).unwrap();
            let b = (max_len - 1).min(len);
            prop_assert_eq!(truncate_ids(&input, &head), input[..b].to_vec());
            prop_assert_eq!(truncate_ids(&input, &tail), input[len - b..].to_vec());
        }
    }
}
