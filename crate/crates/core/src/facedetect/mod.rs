//! Viola-Jones face localization over integral images.
//!
//! Features are evaluated on luma. Each window's feature values are divided
//! by the window's luma standard deviation (clamped to at least 1). Windows
//! grow geometrically from the cascade's base size; feature rectangles are
//! scaled with the window instead of resampling the image, and weak
//! thresholds are scaled by the window-to-base area ratio.

mod cascade;
mod integral;

pub use cascade::{HaarCascade, HaarRect, Stage, WeakClassifier};
pub use integral::{IntegralImage, LumaIntegrals};

use alloc::vec::Vec;
use thiserror::Error;

use crate::frame::{Frame, FrameSequence};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DetectError {
    #[error("invalid cascade: {0}")]
    InvalidCascade(&'static str),
    #[error("invalid detector parameters: {0}")]
    InvalidParams(&'static str),
    #[error("window {window:?} at scale {scale} lies outside the {width}x{height} image")]
    WindowOutOfBounds {
        window: RoiBox,
        scale: f64,
        width: usize,
        height: usize,
    },
    #[error("frame {width}x{height} is smaller than the {base_w}x{base_h} base window")]
    FrameTooSmall {
        width: usize,
        height: usize,
        base_w: u32,
        base_h: u32,
    },
    #[error("no face found")]
    NoFaceFound,
    #[error("no face found in any of {frames} frames")]
    NoFaceInClip { frames: usize },
}

/// Axis-aligned box in pixel coordinates: `[x, x + w) × [y, y + h)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RoiBox {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl RoiBox {
    pub const fn new(x: usize, y: usize, w: usize, h: usize) -> Self {
        RoiBox { x, y, w, h }
    }

    pub fn area(&self) -> usize {
        self.w * self.h
    }

    /// True for a nonempty box inside a `width × height` image.
    pub fn fits(&self, width: usize, height: usize) -> bool {
        self.w >= 1
            && self.h >= 1
            && self.x.checked_add(self.w).is_some_and(|r| r <= width)
            && self.y.checked_add(self.h).is_some_and(|b| b <= height)
    }

    pub fn intersection_over_union(&self, other: &RoiBox) -> f64 {
        let x0 = self.x.max(other.x);
        let y0 = self.y.max(other.y);
        let x1 = (self.x + self.w).min(other.x + other.w);
        let y1 = (self.y + self.h).min(other.y + other.h);
        if x1 <= x0 || y1 <= y0 {
            return 0.0;
        }
        let inter = ((x1 - x0) * (y1 - y0)) as f64;
        inter / ((self.area() + other.area()) as f64 - inter)
    }
}

/// Sliding-window search parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectParams {
    /// Ratio between consecutive window sizes; must exceed 1.
    pub scale_factor: f64,
    /// Stride as a fraction of the current window width (at least 1 pixel).
    pub stride_fraction: f64,
}

impl Default for DetectParams {
    fn default() -> Self {
        DetectParams {
            scale_factor: 1.25,
            stride_fraction: 0.1,
        }
    }
}

impl DetectParams {
    pub fn validate(&self) -> Result<(), DetectError> {
        if !(self.scale_factor.is_finite() && self.scale_factor > 1.0) {
            return Err(DetectError::InvalidParams("scale_factor must be > 1"));
        }
        if !(self.stride_fraction.is_finite() && self.stride_fraction > 0.0) {
            return Err(DetectError::InvalidParams("stride_fraction must be > 0"));
        }
        Ok(())
    }

    pub fn stride(&self, window_width: usize) -> usize {
        let s = libm::round(self.stride_fraction * window_width as f64);
        if s < 1.0 {
            1
        } else {
            s as usize
        }
    }
}

#[inline]
fn scaled(v: u32, scale: f64) -> usize {
    libm::round(f64::from(v) * scale) as usize
}

/// Window size `round(base · scale)` for each axis.
pub fn scaled_window(cascade: &HaarCascade, scale: f64) -> (usize, usize) {
    (
        scaled(cascade.base_window.0, scale),
        scaled(cascade.base_window.1, scale),
    )
}

/// Standard deviation of luma over `window`, clamped to at least 1.
fn window_std(ii: &LumaIntegrals, window: &RoiBox) -> f64 {
    let n = window.area() as f64;
    let s = ii.sum.rect_sum(window.x, window.y, window.w, window.h) as f64;
    let sq = ii.squares.rect_sum(window.x, window.y, window.w, window.h) as f64;
    let mean = s / n;
    let var = sq / n - mean * mean;
    let sd = libm::sqrt(if var > 0.0 { var } else { 0.0 });
    if sd < 1.0 {
        1.0
    } else {
        sd
    }
}

/// Raw weighted rectangle sum of one feature with its rectangles scaled into
/// `window`.
fn feature_value(ii: &IntegralImage, rects: &[HaarRect], window: &RoiBox, scale: f64) -> f64 {
    rects
        .iter()
        .map(|r| {
            let rx = scaled(r.x, scale).min(window.w - 1);
            let ry = scaled(r.y, scale).min(window.h - 1);
            let rw = scaled(r.w, scale).clamp(1, window.w - rx);
            let rh = scaled(r.h, scale).clamp(1, window.h - ry);
            r.weight * ii.rect_sum(window.x + rx, window.y + ry, rw, rh) as f64
        })
        .sum()
}

/// Runs the cascade on one window.
///
/// A stage passes when the sum of its weak outputs is at least the stage
/// threshold; each weak classifier emits `left_val` when its normalized
/// feature value is below its (area-scaled) threshold and `right_val`
/// otherwise. Evaluation stops at the first failing stage.
pub fn evaluate_window(
    cascade: &HaarCascade,
    ii: &LumaIntegrals,
    window: RoiBox,
    scale: f64,
) -> Result<bool, DetectError> {
    if scale.is_nan() || scale < 1.0 || !window.fits(ii.width(), ii.height()) {
        return Err(DetectError::WindowOutOfBounds {
            window,
            scale,
            width: ii.width(),
            height: ii.height(),
        });
    }
    let sd = window_std(ii, &window);
    let (bw, bh) = cascade.base_window;
    let area_ratio = window.area() as f64 / (f64::from(bw) * f64::from(bh));
    for stage in &cascade.stages {
        let total: f64 = stage
            .weak
            .iter()
            .map(|weak| {
                let v = feature_value(&ii.sum, &weak.rects, &window, scale) / sd;
                if v < weak.threshold * area_ratio {
                    weak.left_val
                } else {
                    weak.right_val
                }
            })
            .sum();
        if total < stage.threshold {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Every `(window, scale)` the sliding search visits, smallest scale first,
/// then row-major within a scale.
pub fn candidate_windows(
    cascade: &HaarCascade,
    width: usize,
    height: usize,
    params: &DetectParams,
) -> Vec<(RoiBox, f64)> {
    let mut out = Vec::new();
    let mut scale = 1.0f64;
    loop {
        let (w, h) = scaled_window(cascade, scale);
        if w > width || h > height {
            break;
        }
        let stride = params.stride(w);
        let mut y = 0;
        while y + h <= height {
            let mut x = 0;
            while x + w <= width {
                out.push((RoiBox::new(x, y, w, h), scale));
                x += stride;
            }
            y += stride;
        }
        scale *= params.scale_factor;
    }
    out
}

/// Returns the largest accepted window; ties go to the smallest `y`, then the
/// smallest `x`.
pub fn detect_face(
    frame: &Frame<'_>,
    cascade: &HaarCascade,
    params: &DetectParams,
) -> Result<RoiBox, DetectError> {
    params.validate()?;
    let (bw, bh) = cascade.base_window;
    if frame.width() < bw as usize || frame.height() < bh as usize {
        return Err(DetectError::FrameTooSmall {
            width: frame.width(),
            height: frame.height(),
            base_w: bw,
            base_h: bh,
        });
    }
    let ii = LumaIntegrals::new(frame);
    let mut best: Option<RoiBox> = None;
    for (window, scale) in candidate_windows(cascade, frame.width(), frame.height(), params) {
        let better = match best {
            None => true,
            Some(b) => {
                (window.area(), core::cmp::Reverse((window.y, window.x)))
                    > (b.area(), core::cmp::Reverse((b.y, b.x)))
            }
        };
        if better && evaluate_window(cascade, &ii, window, scale)? {
            best = Some(window);
        }
    }
    best.ok_or(DetectError::NoFaceFound)
}

/// Detects a box in every frame of a clip.
///
/// A frame without a detection reuses the most recent successful box; frames
/// before the first success take the first successful box. Fails only if no
/// frame yields a detection.
pub fn detect_sequence(
    frames: &FrameSequence,
    cascade: &HaarCascade,
    params: &DetectParams,
) -> Result<Vec<RoiBox>, DetectError> {
    let mut found: Vec<Option<RoiBox>> = Vec::with_capacity(frames.frame_count());
    for frame in frames.frames() {
        match detect_face(&frame, cascade, params) {
            Ok(roi) => found.push(Some(roi)),
            Err(DetectError::NoFaceFound) => found.push(None),
            Err(e) => return Err(e),
        }
    }
    let first = found
        .iter()
        .flatten()
        .copied()
        .next()
        .ok_or(DetectError::NoFaceInClip {
            frames: frames.frame_count(),
        })?;
    let mut last = first;
    Ok(found
        .into_iter()
        .map(|f| {
            if let Some(roi) = f {
                last = roi;
            }
            last
        })
        .collect())
}
