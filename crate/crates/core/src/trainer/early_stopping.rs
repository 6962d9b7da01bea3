/// Early stopping on a metric to maximize.
///
/// The best score tracks every strict improvement. The patience counter
/// resets only when a score beats the best so far by at least `threshold`;
/// training stops once `patience` consecutive epochs fail to do so.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    threshold: f64,
    best: Option<f64>,
    stale_epochs: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Observation {
    /// Score is the best seen so far; snapshot the parameters.
    pub is_best: bool,
    pub stop: bool,
}

// absorbs rounding in differences like 0.5025 - 0.5
const SLACK: f64 = 1e-12;

impl EarlyStopping {
    pub fn new(patience: usize, threshold: f64) -> Self {
        Self { patience, threshold, best: None, stale_epochs: 0 }
    }

    pub fn best(&self) -> Option<f64> {
        self.best
    }

    pub fn observe(&mut self, score: f64) -> Observation {
        let (is_best, significant) = match self.best {
            None => (true, true),
            Some(best) => (score > best, score - best >= self.threshold - SLACK),
        };
        if significant {
            self.stale_epochs = 0;
        } else {
            self.stale_epochs += 1;
        }
        if is_best {
            self.best = Some(score);
        }
        Observation { is_best, stop: self.stale_epochs >= self.patience }
    }
}
