//! Deterministic inputs for the benchmarks in `benches/`.

use depscreen_core::dataset::{LabeledExample, SplitTag};
use depscreen_core::truncation::TokenId;
use depscreen_core::{Dataset, Severity, NUM_CLASSES};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn token_ids(len: usize, seed: u64) -> Vec<TokenId> {
    let mut r = rng(seed);
    (0..len).map(|_| r.gen()).collect()
}

/// `n` examples x `members` logit vectors.
pub fn member_logits(n: usize, members: usize, seed: u64) -> Vec<Vec<Vec<f64>>> {
    let mut r = rng(seed);
    (0..n).map(|_| (0..members).map(|_| (0..NUM_CLASSES).map(|_| r.gen_range(-4.0..4.0)).collect()).collect()).collect()
}

pub fn labels(n: usize, seed: u64) -> Vec<usize> {
    let mut r = rng(seed);
    (0..n).map(|_| r.gen_range(0..NUM_CLASSES)).collect()
}

/// Dataset with the given per-class counts and short random texts.
pub fn dataset(counts: [usize; NUM_CLASSES], seed: u64) -> Dataset {
    let mut r = rng(seed);
    let examples = Severity::ALL
        .iter()
        .zip(counts)
        .flat_map(|(&s, n)| std::iter::repeat(s).take(n))
        .enumerate()
        .map(|(i, s)| LabeledExample::new(format!("b{i:06}"), format!("text {}", r.gen::<u64>()), s))
        .collect();
    Dataset::new(examples, SplitTag::Combined).expect("unique ids")
}
