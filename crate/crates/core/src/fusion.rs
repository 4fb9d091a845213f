//! Early and late fusion of the rPPG and visual modalities.
//!
//! Early fusion feeds the concatenated feature vector to one network. Late
//! fusion runs one network per modality and takes a weighted average of
//! their class probabilities (probabilities, not logits, so the two models'
//! output scales are comparable).

use alloc::vec::Vec;
use thiserror::Error;

use crate::classifier::{argmax, ClassProbabilities, ClassifierError, MlpModel};

const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FusionError {
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error("fusion weights ({w1}, {w2}) must be nonnegative and sum to 1")]
    InvalidWeights { w1: f64, w2: f64 },
    #[error("models disagree on class count ({rppg} vs {visual})")]
    ClassCountMismatch { rppg: usize, visual: usize },
    #[error("grid step {0} must lie in (0, 0.5]")]
    InvalidStep(f64),
    #[error("empty validation set")]
    EmptyValidation,
    #[error("validation arrays are misaligned: {rppg} rPPG, {visual} visual, {labels} labels")]
    Misaligned {
        rppg: usize,
        visual: usize,
        labels: usize,
    },
}

/// Late-fusion weights: `w1` for rPPG, `w2` for visual, summing to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionWeights {
    w1: f64,
    w2: f64,
}

impl FusionWeights {
    pub fn new(w1: f64, w2: f64) -> Result<Self, FusionError> {
        let ok = w1.is_finite()
            && w2.is_finite()
            && w1 >= 0.0
            && w2 >= 0.0
            && (w1 + w2 - 1.0).abs() <= WEIGHT_SUM_TOLERANCE;
        if ok {
            Ok(FusionWeights { w1, w2 })
        } else {
            Err(FusionError::InvalidWeights { w1, w2 })
        }
    }

    pub fn rppg(&self) -> f64 {
        self.w1
    }

    pub fn visual(&self) -> f64 {
        self.w2
    }
}

impl Default for FusionWeights {
    fn default() -> Self {
        FusionWeights { w1: 0.5, w2: 0.5 }
    }
}

/// Early fusion: the fusion network applied to the concatenated features.
pub fn predict_early(
    fusion_model: &MlpModel,
    fused: &[f64],
) -> Result<ClassProbabilities, FusionError> {
    Ok(fusion_model.forward(fused)?)
}

/// `w1 · a + w2 · b` per class, for any nonnegative weights.
///
/// Coordinates where both inputs agree are passed through unchanged, so the
/// average of identical distributions is exactly that distribution.
pub fn weighted_sum(a: &[f64], b: &[f64], w1: f64, w2: f64) -> Vec<f64> {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| if x == y { x } else { w1 * x + w2 * y })
        .collect()
}

/// Weighted average of two probability vectors.
pub fn combine_late(
    rppg: &ClassProbabilities,
    visual: &ClassProbabilities,
    weights: FusionWeights,
) -> Result<ClassProbabilities, FusionError> {
    if rppg.probs.len() != visual.probs.len() {
        return Err(FusionError::ClassCountMismatch {
            rppg: rppg.probs.len(),
            visual: visual.probs.len(),
        });
    }
    Ok(ClassProbabilities {
        probs: weighted_sum(&rppg.probs, &visual.probs, weights.w1, weights.w2),
    })
}

/// Late fusion: each modality through its own model, then [`combine_late`].
pub fn predict_late(
    model_rppg: &MlpModel,
    model_visual: &MlpModel,
    weights: FusionWeights,
    x_rppg: &[f64],
    x_visual: &[f64],
) -> Result<ClassProbabilities, FusionError> {
    let p1 = model_rppg.forward(x_rppg)?;
    let p2 = model_visual.forward(x_visual)?;
    combine_late(&p1, &p2, weights)
}

/// `w1` candidates `{0, step, 2·step, …, 1}`; `1` is always included.
pub fn weight_grid(step: f64) -> Result<Vec<f64>, FusionError> {
    if !(step > 0.0 && step <= 0.5) {
        return Err(FusionError::InvalidStep(step));
    }
    let mut grid = Vec::new();
    let mut k = 0u32;
    loop {
        let w = f64::from(k) * step;
        if w > 1.0 - WEIGHT_SUM_TOLERANCE {
            break;
        }
        grid.push(w);
        k += 1;
    }
    grid.push(1.0);
    Ok(grid)
}

/// Outcome of the validation grid search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TunedWeights {
    pub weights: FusionWeights,
    /// Validation accuracy of `argmax(F_late)` at the chosen weights.
    pub accuracy: f64,
}

/// Accuracy of late fusion at rPPG weight `w1` on aligned validation outputs.
pub fn late_fusion_accuracy(
    probs_rppg: &[ClassProbabilities],
    probs_visual: &[ClassProbabilities],
    labels: &[usize],
    w1: f64,
) -> f64 {
    let w2 = 1.0 - w1;
    let correct = probs_rppg
        .iter()
        .zip(probs_visual)
        .zip(labels)
        .filter(|((a, b), &y)| argmax(&weighted_sum(&a.probs, &b.probs, w1, w2)) == y)
        .count();
    correct as f64 / labels.len() as f64
}

/// Grid-searches `w1` on validation outputs, maximizing accuracy.
///
/// Ties prefer the candidate closest to an even split, then the smaller `w1`.
pub fn tune_weights(
    probs_rppg: &[ClassProbabilities],
    probs_visual: &[ClassProbabilities],
    labels: &[usize],
    step: f64,
) -> Result<TunedWeights, FusionError> {
    if probs_rppg.len() != labels.len() || probs_visual.len() != labels.len() {
        return Err(FusionError::Misaligned {
            rppg: probs_rppg.len(),
            visual: probs_visual.len(),
            labels: labels.len(),
        });
    }
    if labels.is_empty() {
        return Err(FusionError::EmptyValidation);
    }
    let grid = weight_grid(step)?;
    let mut best: Option<(f64, f64)> = None;
    for w1 in grid {
        let acc = late_fusion_accuracy(probs_rppg, probs_visual, labels, w1);
        let replace = match best {
            None => true,
            Some((bw, bacc)) => {
                let (d, bd) = ((w1 - 0.5).abs(), (bw - 0.5).abs());
                acc > bacc || (acc == bacc && d < bd - 1e-12)
            }
        };
        if replace {
            best = Some((w1, acc));
        }
    }
    let (w1, accuracy) = best.expect("grid is nonempty");
    Ok(TunedWeights {
        weights: FusionWeights { w1, w2: 1.0 - w1 },
        accuracy,
    })
}
