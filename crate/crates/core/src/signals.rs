//! rPPG extraction and feature standardization.
//!
//! An rPPG sample is the mean of each color channel over the face ROI of one
//! frame. Per-clip features are flattened time-major, zero-padded (or
//! truncated) to a fixed per-modality length, and concatenated for early
//! fusion.

use alloc::vec::Vec;
use core::ops::Range;
use thiserror::Error;

use crate::facedetect::RoiBox;
use crate::frame::{Frame, FrameSequence, LandmarkTrack, LANDMARK_COUNT};
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SignalError {
    #[error("ROI {roi:?} is empty or outside the {width}x{height} frame")]
    RoiOutOfBounds {
        roi: RoiBox,
        width: usize,
        height: usize,
    },
    #[error("frame {frame}: {source}")]
    AtFrame {
        frame: usize,
        #[source]
        source: alloc::boxed::Box<SignalError>,
    },
    #[error("{frames} frames but {rois} ROIs")]
    LengthMismatch { frames: usize, rois: usize },
}

/// Mean R, G, B intensity over `roi`.
pub fn mean_roi_intensity(frame: &Frame<'_>, roi: &RoiBox) -> Result<[f64; 3], SignalError> {
    if !roi.fits(frame.width(), frame.height()) {
        return Err(SignalError::RoiOutOfBounds {
            roi: *roi,
            width: frame.width(),
            height: frame.height(),
        });
    }
    let data = frame.data();
    let mut sums = [0.0f64; 3];
    for y in roi.y..roi.y + roi.h {
        let start = (y * frame.width() + roi.x) * 3;
        for px in data[start..start + roi.w * 3].chunks_exact(3) {
            sums[0] += f64::from(px[0]);
            sums[1] += f64::from(px[1]);
            sums[2] += f64::from(px[2]);
        }
    }
    let n = roi.area() as f64;
    Ok(sums.map(|s| s / n))
}

/// Per-frame ROI channel means of one clip.
#[derive(Debug, Clone, PartialEq)]
pub struct RppgSignal {
    samples: Vec<[f64; 3]>,
}

impl RppgSignal {
    pub fn new(samples: Vec<[f64; 3]>) -> Self {
        RppgSignal { samples }
    }

    pub fn samples(&self) -> &[[f64; 3]] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// `[R₀, G₀, B₀, R₁, G₁, B₁, …]`.
    pub fn flatten(&self) -> Vec<f64> {
        self.samples.iter().flatten().copied().collect()
    }
}

/// Applies [`mean_roi_intensity`] to every frame with its own ROI.
pub fn extract_rppg(frames: &FrameSequence, rois: &[RoiBox]) -> Result<RppgSignal, SignalError> {
    if rois.len() != frames.frame_count() {
        return Err(SignalError::LengthMismatch {
            frames: frames.frame_count(),
            rois: rois.len(),
        });
    }
    frames
        .frames()
        .zip(rois)
        .enumerate()
        .map(|(t, (frame, roi))| {
            mean_roi_intensity(&frame, roi).map_err(|e| SignalError::AtFrame {
                frame: t,
                source: alloc::boxed::Box::new(e),
            })
        })
        .collect::<Result<Vec<_>, _>>()
        .map(RppgSignal::new)
}

/// Rewrites landmarks relative to each frame's ROI: `((x − x₀)/w, (y − y₀)/h)`.
pub fn normalize_landmarks(
    track: &LandmarkTrack,
    rois: &[RoiBox],
) -> Result<LandmarkTrack, SignalError> {
    if rois.len() != track.frame_count() {
        return Err(SignalError::LengthMismatch {
            frames: track.frame_count(),
            rois: rois.len(),
        });
    }
    let points = track
        .frames()
        .iter()
        .zip(rois)
        .map(|(pts, roi)| {
            let mut out = [[0.0; 2]; LANDMARK_COUNT];
            for (o, p) in out.iter_mut().zip(pts) {
                *o = [
                    (p[0] - roi.x as f64) / roi.w as f64,
                    (p[1] - roi.y as f64) / roi.h as f64,
                ];
            }
            out
        })
        .collect();
    Ok(LandmarkTrack::new(points))
}

/// A feature vector brought to a fixed length.
#[derive(Debug, Clone, PartialEq)]
pub struct PaddedFeatures {
    pub values: Vec<f64>,
    /// Length of the source before padding or truncation.
    pub original_length: usize,
    /// Set when the source was longer than the target and its tail dropped.
    pub truncated: bool,
}

/// Copies `flat` into a vector of exactly `target_len` values, filling the
/// tail with zeros or cutting it off.
pub fn zero_pad(flat: &[f64], target_len: usize) -> PaddedFeatures {
    let keep = flat.len().min(target_len);
    let mut values = Vec::with_capacity(target_len);
    values.extend_from_slice(&flat[..keep]);
    values.resize(target_len, 0.0);
    PaddedFeatures {
        values,
        original_length: flat.len(),
        truncated: flat.len() > target_len,
    }
}

/// Early-fusion input: rPPG features followed by visual features.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedVector {
    pub values: Vec<f64>,
    pub rppg_span: Range<usize>,
    pub visual_span: Range<usize>,
}

impl FusedVector {
    pub fn rppg(&self) -> &[f64] {
        &self.values[self.rppg_span.clone()]
    }

    pub fn visual(&self) -> &[f64] {
        &self.values[self.visual_span.clone()]
    }
}

pub fn concat_features(rppg: &[f64], visual: &[f64]) -> FusedVector {
    let mut values = Vec::with_capacity(rppg.len() + visual.len());
    values.extend_from_slice(rppg);
    values.extend_from_slice(visual);
    FusedVector {
        values,
        rppg_span: 0..rppg.len(),
        visual_span: rppg.len()..rppg.len() + visual.len(),
    }
}

/// Per-column z-scoring `(v − mean) / scale`, fitted on training rows.
///
/// Columns with (near) zero spread keep scale 1 so padding columns that are
/// zero for every training clip stay zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnScaler {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl ColumnScaler {
    pub fn identity(width: usize) -> Self {
        ColumnScaler {
            mean: alloc::vec![0.0; width],
            scale: alloc::vec![1.0; width],
        }
    }

    /// Population mean and standard deviation per column; `None` without rows.
    pub fn fit(features: &Matrix) -> Option<Self> {
        let n = features.rows();
        if n == 0 {
            return None;
        }
        let mut mean = alloc::vec![0.0; features.cols()];
        for row in features.iter_rows() {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut var = alloc::vec![0.0; features.cols()];
        for row in features.iter_rows() {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let scale = var
            .into_iter()
            .map(|s| {
                let sd = libm::sqrt(s / n as f64);
                if sd > 1e-9 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Some(ColumnScaler { mean, scale })
    }

    pub fn width(&self) -> usize {
        self.mean.len()
    }

    /// Columns `span` of this scaler as a scaler of their own.
    pub fn slice(&self, span: Range<usize>) -> ColumnScaler {
        ColumnScaler {
            mean: self.mean[span.clone()].to_vec(),
            scale: self.scale[span].to_vec(),
        }
    }

    /// Panics if the row width differs from the fitted width.
    pub fn apply_row(&self, row: &mut [f64]) {
        assert_eq!(row.len(), self.width(), "scaler width mismatch");
        for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.scale) {
            *v = (*v - m) / s;
        }
    }

    pub fn apply(&self, features: &mut Matrix) {
        let cols = features.cols();
        for chunk in features.as_mut_slice().chunks_mut(cols.max(1)) {
            self.apply_row(chunk);
        }
    }
}
