//! Core algorithms for multimodal emotion classification from face video.
//!
//! Everything here is pure computation over in-memory data and builds under
//! `no_std` with `alloc`. Parsing, file formats and the command-line driver
//! live in the `emofuse` crate.
//!
//! The pipeline, in order:
//!
//! 1. [`facedetect`] locates a facial ROI per frame with a Viola-Jones
//!    cascade evaluated over integral images.
//! 2. [`signals`] turns each clip into an rPPG trace (per-frame ROI channel
//!    means), zero-pads variable-length features and concatenates modalities.
//! 3. [`classifier`] trains dense ReLU/softmax networks per modality and on
//!    the concatenated input.
//! 4. [`fusion`] combines modalities early (concatenation) or late (weighted
//!    average of class probabilities).
//! 5. [`evaluate`] and [`interpret`] score the models and attribute their
//!    skill to each modality by permutation feature importance.

#![no_std]
#![warn(missing_debug_implementations)]

extern crate alloc;

pub mod classifier;
pub mod emotion;
pub mod evaluate;
pub mod facedetect;
pub mod frame;
pub mod fusion;
pub mod interpret;
pub mod matrix;
pub mod signals;

pub use classifier::{ClassProbabilities, MlpModel, TrainConfig};
pub use emotion::{Emotion, NUM_EMOTIONS};
pub use frame::{Channel, Frame, FrameSequence, LandmarkTrack, LANDMARK_COUNT};
pub use matrix::Matrix;
