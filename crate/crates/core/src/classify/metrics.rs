//! Binary classification metrics with label 1 as the positive class.

use serde::{Deserialize, Serialize};

/// Confusion counts of one evaluation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BinaryCounts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl BinaryCounts {
    pub fn tally(truth: &[u8], predicted: &[u8]) -> Self {
        let mut counts = Self::default();
        for (&t, &p) in truth.iter().zip(predicted) {
            match (t, p) {
                (1, 1) => counts.tp += 1,
                (0, 1) => counts.fp += 1,
                (1, 0) => counts.fn_ += 1,
                _ => counts.tn += 1,
            }
        }
        counts
    }

    fn ratio(num: usize, den: usize) -> f64 {
        if den == 0 {
            0.0
        } else {
            num as f64 / den as f64
        }
    }

    pub fn accuracy(&self) -> f64 {
        Self::ratio(self.tp + self.tn, self.tp + self.fp + self.fn_ + self.tn)
    }

    pub fn precision(&self) -> f64 {
        Self::ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        Self::ratio(self.tp, self.tp + self.fn_)
    }

    pub fn f1(&self) -> f64 {
        let p = self.precision();
        let r = self.recall();
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }

    pub fn fold_metrics(&self) -> FoldMetrics {
        FoldMetrics {
            accuracy: self.accuracy(),
            f1: self.f1(),
            precision: self.precision(),
            recall: self.recall(),
        }
    }
}

/// Metrics of a single evaluation fold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoldMetrics {
    pub accuracy: f64,
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
}

/// Mean and standard deviation of each metric across folds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: (f64, f64),
    pub f1: (f64, f64),
    pub precision: (f64, f64),
    pub recall: (f64, f64),
}

impl MetricsReport {
    pub fn from_folds(folds: &[FoldMetrics]) -> Self {
        let summarize = |extract: fn(&FoldMetrics) -> f64| {
            let n = folds.len() as f64;
            let mean = folds.iter().map(extract).sum::<f64>() / n;
            let var = folds.iter().map(|f| (extract(f) - mean).powi(2)).sum::<f64>() / n;
            (mean, var.sqrt())
        };
        Self {
            accuracy: summarize(|f| f.accuracy),
            f1: summarize(|f| f.f1),
            precision: summarize(|f| f.precision),
            recall: summarize(|f| f.recall),
        }
    }
}
