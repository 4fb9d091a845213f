//! Confusion matrices and macro-averaged classification metrics.

use alloc::vec;
use alloc::vec::Vec;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("no predictions to evaluate")]
    Empty,
    #[error("{predictions} predictions but {labels} labels")]
    Misaligned { predictions: usize, labels: usize },
    #[error("class index {value} at position {index} is out of range for {num_classes} classes")]
    ClassOutOfRange {
        index: usize,
        value: usize,
        num_classes: usize,
    },
}

/// Counts indexed `[true class][predicted class]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    num_classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn from_counts(rows: &[Vec<u64>]) -> Result<Self, EvalError> {
        let n = rows.len();
        let mut counts = Vec::with_capacity(n * n);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != n {
                return Err(EvalError::Misaligned {
                    predictions: r.len(),
                    labels: i,
                });
            }
            counts.extend_from_slice(r);
        }
        let cm = ConfusionMatrix {
            num_classes: n,
            counts,
        };
        if cm.total() == 0 {
            return Err(EvalError::Empty);
        }
        Ok(cm)
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.num_classes + predicted]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.num_classes).map(|c| self.get(c, c)).sum()
    }

    /// Samples whose true class is `c`.
    pub fn row_sum(&self, c: usize) -> u64 {
        (0..self.num_classes).map(|p| self.get(c, p)).sum()
    }

    /// Samples predicted as `c`.
    pub fn col_sum(&self, c: usize) -> u64 {
        (0..self.num_classes).map(|t| self.get(t, c)).sum()
    }
}

pub fn confusion_matrix(
    predictions: &[usize],
    labels: &[usize],
    num_classes: usize,
) -> Result<ConfusionMatrix, EvalError> {
    if predictions.len() != labels.len() {
        return Err(EvalError::Misaligned {
            predictions: predictions.len(),
            labels: labels.len(),
        });
    }
    if labels.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut counts = vec![0u64; num_classes * num_classes];
    for (index, (&p, &t)) in predictions.iter().zip(labels).enumerate() {
        for value in [t, p] {
            if value >= num_classes {
                return Err(EvalError::ClassOutOfRange {
                    index,
                    value,
                    num_classes,
                });
            }
        }
        counts[t * num_classes + p] += 1;
    }
    Ok(ConfusionMatrix {
        num_classes,
        counts,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    /// Per-class values for every class, including ones absent from labels.
    pub per_class: Vec<ClassMetrics>,
    /// Some averaged class had a 0/0 precision or F1, counted as 0.
    pub zero_division: bool,
}

/// Accuracy plus precision, recall and F1 macro-averaged over the classes
/// that occur in the labels. A class that is never predicted has precision 0.
pub fn compute_metrics(cm: &ConfusionMatrix) -> Metrics {
    let ratio = |num: u64, den: u64| {
        if den == 0 {
            (0.0, true)
        } else {
            (num as f64 / den as f64, false)
        }
    };
    let mut zero_division = false;
    let mut sums = [0.0f64; 3];
    let mut present = 0usize;
    let per_class: Vec<ClassMetrics> = (0..cm.num_classes())
        .map(|c| {
            let tp = cm.get(c, c);
            let support = cm.row_sum(c);
            let (precision, p_zero) = ratio(tp, cm.col_sum(c));
            let (recall, _) = ratio(tp, support);
            let f1 = if precision + recall > 0.0 {
                2.0 * precision * recall / (precision + recall)
            } else {
                0.0
            };
            if support > 0 {
                present += 1;
                sums[0] += precision;
                sums[1] += recall;
                sums[2] += f1;
                zero_division |= p_zero || precision + recall == 0.0;
            }
            ClassMetrics {
                precision,
                recall,
                f1,
                support,
            }
        })
        .collect();
    let n = present.max(1) as f64;
    Metrics {
        accuracy: cm.trace() as f64 / cm.total() as f64,
        macro_precision: sums[0] / n,
        macro_recall: sums[1] / n,
        macro_f1: sums[2] / n,
        per_class,
        zero_division,
    }
}
