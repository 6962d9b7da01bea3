//! Seeded synthetic datasets for smoke tests and benchmarks.
//!
//! Each text mixes shared filler words with marker words of its class. The
//! vocabulary is chosen so that under the default toy-linear encoder no two
//! words share a feature slot, which makes the classes linearly separable in
//! feature space.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::backend::{ToyLinear, TOY_LINEAR_DEFAULT_DIM as DEFAULT_DIM};
use crate::dataset::{Dataset, LabeledExample, SplitTag};
use crate::label::{Severity, NUM_CLASSES};

const MARKERS_PER_CLASS: usize = 3;
const FILLERS: usize = 40;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    pub markers: [Vec<String>; NUM_CLASSES],
    pub fillers: Vec<String>,
}

/// Words with pairwise distinct slots under `ToyLinear::new(DEFAULT_DIM, 0)`.
pub fn vocabulary() -> Vocabulary {
    let encoder = ToyLinear::new(DEFAULT_DIM, 0).expect("valid dim").encoder();
    let mut used = HashSet::new();
    let mut candidates = (0u32..).map(|n| format!("w{n:04}")).filter(|w| used.insert(encoder.word_slot(w)));
    let mut take = |n: usize| candidates.by_ref().take(n).collect::<Vec<_>>();
    let markers = [take(MARKERS_PER_CLASS), take(MARKERS_PER_CLASS), take(MARKERS_PER_CLASS)];
    let fillers = take(FILLERS);
    Vocabulary { markers, fillers }
}

/// `counts[c]` examples of class `c`, ids `syn-{split}-00000`.., in shuffled order.
pub fn separable(counts: [usize; NUM_CLASSES], seed: u64, split: SplitTag) -> Dataset {
    let vocab = vocabulary();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labels: Vec<Severity> =
        Severity::ALL.iter().zip(counts).flat_map(|(&s, n)| std::iter::repeat(s).take(n)).collect();
    labels.shuffle(&mut rng);
    let examples = labels
        .into_iter()
        .enumerate()
        .map(|(i, label)| {
            let n_fill = rng.gen_range(3..=10);
            let n_mark = rng.gen_range(2..=4);
            let mut words: Vec<&str> = (0..n_fill).map(|_| vocab.fillers.choose(&mut rng).unwrap().as_str()).collect();
            let markers = &vocab.markers[label.index()];
            words.extend((0..n_mark).map(|_| markers.choose(&mut rng).unwrap().as_str()));
            words.shuffle(&mut rng);
            LabeledExample::new(format!("syn-{split}-{i:05}"), words.join(" "), label)
        })
        .collect();
    Dataset::new(examples, split).expect("generated ids are unique and texts non-empty")
}
