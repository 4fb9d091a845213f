use alloc::vec::Vec;

use super::DetectError;

/// Weighted rectangle of a Haar-like feature, in base-window coordinates.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HaarRect {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
    pub weight: f64,
}

/// Decision stump over one Haar-like feature.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct WeakClassifier {
    pub rects: Vec<HaarRect>,
    /// Normalized feature values below this emit `left_val`, others `right_val`.
    pub threshold: f64,
    pub left_val: f64,
    pub right_val: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Stage {
    /// A window passes when the summed weak outputs reach this value.
    pub threshold: f64,
    pub weak: Vec<WeakClassifier>,
}

/// Ordered boosted stages; a window is a face only if every stage passes.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HaarCascade {
    /// `(width, height)` of the unscaled detection window.
    pub base_window: (u32, u32),
    pub stages: Vec<Stage>,
}

impl HaarCascade {
    pub const DEFAULT_BASE_WINDOW: (u32, u32) = (24, 24);

    pub fn new(base_window: (u32, u32), stages: Vec<Stage>) -> Result<Self, DetectError> {
        let cascade = HaarCascade {
            base_window,
            stages,
        };
        cascade.validate()?;
        Ok(cascade)
    }

    /// Checks the structural invariants: a nonempty base window, at least one
    /// stage, at least one weak classifier per stage, every rectangle nonempty
    /// and inside the base window, and all reals finite.
    pub fn validate(&self) -> Result<(), DetectError> {
        let (bw, bh) = self.base_window;
        if bw == 0 || bh == 0 {
            return Err(DetectError::InvalidCascade("base window must be nonempty"));
        }
        if self.stages.is_empty() {
            return Err(DetectError::InvalidCascade("cascade has no stages"));
        }
        for stage in &self.stages {
            if stage.weak.is_empty() {
                return Err(DetectError::InvalidCascade(
                    "stage without weak classifiers",
                ));
            }
            if !stage.threshold.is_finite() {
                return Err(DetectError::InvalidCascade("non-finite stage threshold"));
            }
            for weak in &stage.weak {
                if weak.rects.is_empty() {
                    return Err(DetectError::InvalidCascade(
                        "weak classifier without rectangles",
                    ));
                }
                if !(weak.threshold.is_finite()
                    && weak.left_val.is_finite()
                    && weak.right_val.is_finite())
                {
                    return Err(DetectError::InvalidCascade(
                        "non-finite weak classifier value",
                    ));
                }
                for r in &weak.rects {
                    let inside = r.w > 0
                        && r.h > 0
                        && u64::from(r.x) + u64::from(r.w) <= u64::from(bw)
                        && u64::from(r.y) + u64::from(r.h) <= u64::from(bh);
                    if !inside {
                        return Err(DetectError::InvalidCascade(
                            "rectangle outside the base window",
                        ));
                    }
                    if !r.weight.is_finite() {
                        return Err(DetectError::InvalidCascade("non-finite rectangle weight"));
                    }
                }
            }
        }
        Ok(())
    }
}
