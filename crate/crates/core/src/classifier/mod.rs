//! Dense feed-forward classifiers.
//!
//! A model is a chain of affine layers. Hidden layers apply ReLU, optionally
//! adding their input back (an identity skip, only between equal widths);
//! the output layer applies softmax. The same structure backs the rPPG model,
//! the visual model and the early-fusion network; only the input width
//! differs.

mod train;

pub use train::{loss_and_gradients, train, EpochStats, Gradients, TrainConfig, TrainOutcome};

use alloc::vec;
use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::matrix::Matrix;

/// Hidden widths of every default architecture: `[n_in, 512, 256, n_classes]`.
pub const DEFAULT_HIDDEN: [usize; 2] = [512, 256];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClassifierError {
    #[error("a network needs at least an input and an output size, got {0}")]
    TooFewLayers(usize),
    #[error("layer {0} has zero width")]
    ZeroWidth(usize),
    #[error("expected {expected} residual flags (one per hidden layer), got {actual}")]
    SkipCount { expected: usize, actual: usize },
    #[error("layer {index}: {reason}")]
    InvalidLayer { index: usize, reason: &'static str },
    #[error("input has {actual} features, model expects {expected}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("input contains a non-finite value")]
    NonFiniteInput,
    #[error("empty dataset")]
    EmptyDataset,
    #[error("{features} samples but {labels} labels")]
    LabelCount { features: usize, labels: usize },
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("invalid training configuration: {0}")]
    InvalidConfig(&'static str),
}

/// Nonlinearity applied after a layer's affine map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    /// `ReLU(W x + b) + x`; requires a square weight matrix.
    ReluResidual,
    Softmax,
}

impl Activation {
    /// Stable one-byte encoding used by the model file format.
    pub fn tag(self) -> u8 {
        match self {
            Activation::Relu => 0,
            Activation::ReluResidual => 1,
            Activation::Softmax => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Activation::Relu),
            1 => Some(Activation::ReluResidual),
            2 => Some(Activation::Softmax),
            _ => None,
        }
    }
}

/// One affine layer: `weights` is `out × in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: Matrix,
    pub biases: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn inputs(&self) -> usize {
        self.weights.cols()
    }

    pub fn outputs(&self) -> usize {
        self.weights.rows()
    }
}

/// A validated layer chain ending in softmax.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    layers: Vec<Layer>,
}

impl MlpModel {
    /// Checks that shapes chain, only the last layer is softmax, residual
    /// layers are square, and every parameter is finite.
    pub fn from_layers(layers: Vec<Layer>) -> Result<Self, ClassifierError> {
        if layers.is_empty() {
            return Err(ClassifierError::TooFewLayers(layers.len() + 1));
        }
        let last = layers.len() - 1;
        for (index, layer) in layers.iter().enumerate() {
            let invalid = |reason| Err(ClassifierError::InvalidLayer { index, reason });
            if layer.inputs() == 0 || layer.outputs() == 0 {
                return Err(ClassifierError::ZeroWidth(
                    index + usize::from(layer.inputs() != 0),
                ));
            }
            if layer.biases.len() != layer.outputs() {
                return invalid("bias length differs from output width");
            }
            if index > 0 && layers[index - 1].outputs() != layer.inputs() {
                return invalid("input width differs from previous output width");
            }
            match (index == last, layer.activation) {
                (true, Activation::Softmax) => {}
                (true, _) => return invalid("output layer must be softmax"),
                (false, Activation::Softmax) => return invalid("softmax on a hidden layer"),
                (false, Activation::ReluResidual) if layer.inputs() != layer.outputs() => {
                    return invalid("residual skip between unequal widths")
                }
                (false, _) => {}
            }
            let finite = layer
                .weights
                .as_slice()
                .iter()
                .chain(&layer.biases)
                .all(|v| v.is_finite());
            if !finite {
                return invalid("non-finite parameter");
            }
        }
        Ok(MlpModel { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    /// `[n_in, h₁, …, n_out]`.
    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.input_width()];
        sizes.extend(self.layers.iter().map(Layer::outputs));
        sizes
    }

    /// Whether each hidden layer carries an identity skip.
    pub fn residual_skips(&self) -> Vec<bool> {
        self.layers[..self.layers.len() - 1]
            .iter()
            .map(|l| l.activation == Activation::ReluResidual)
            .collect()
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn num_classes(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.as_slice().len() + l.biases.len())
            .sum()
    }

    /// Output-layer pre-activations.
    pub fn logits(&self, input: &[f64]) -> Result<Vec<f64>, ClassifierError> {
        self.check_input(input)?;
        let mut h = input.to_vec();
        for layer in &self.layers {
            let mut z = vec![0.0; layer.outputs()];
            layer.weights.mul_vec_into(&h, &mut z);
            for (zi, b) in z.iter_mut().zip(&layer.biases) {
                *zi += b;
            }
            match layer.activation {
                Activation::Relu => z.iter_mut().for_each(|v| *v = v.max(0.0)),
                Activation::ReluResidual => {
                    for (zi, hi) in z.iter_mut().zip(&h) {
                        *zi = zi.max(0.0) + hi;
                    }
                }
                Activation::Softmax => {}
            }
            h = z;
        }
        Ok(h)
    }

    pub fn forward(&self, input: &[f64]) -> Result<ClassProbabilities, ClassifierError> {
        Ok(ClassProbabilities::from_logits(&self.logits(input)?))
    }

    /// Index of the most probable class.
    pub fn predict(&self, input: &[f64]) -> Result<usize, ClassifierError> {
        Ok(self.forward(input)?.argmax())
    }

    fn check_input(&self, input: &[f64]) -> Result<(), ClassifierError> {
        if input.len() != self.input_width() {
            return Err(ClassifierError::DimensionMismatch {
                expected: self.input_width(),
                actual: input.len(),
            });
        }
        if !input.iter().all(|v| v.is_finite()) {
            return Err(ClassifierError::NonFiniteInput);
        }
        Ok(())
    }
}

/// Builds `[n_in, h₁, …, n_out]` with weights drawn uniformly from
/// `±1/√fan_in` and zero biases.
///
/// `residual_skips` is either empty (no skips) or holds one flag per hidden
/// layer; a flag only takes effect where the layer's input and output widths
/// match.
pub fn init_network(
    layer_sizes: &[usize],
    residual_skips: &[bool],
    seed: u64,
) -> Result<MlpModel, ClassifierError> {
    if layer_sizes.len() < 2 {
        return Err(ClassifierError::TooFewLayers(layer_sizes.len()));
    }
    if let Some(i) = layer_sizes.iter().position(|&n| n == 0) {
        return Err(ClassifierError::ZeroWidth(i));
    }
    let hidden = layer_sizes.len() - 2;
    if !residual_skips.is_empty() && residual_skips.len() != hidden {
        return Err(ClassifierError::SkipCount {
            expected: hidden,
            actual: residual_skips.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layers = layer_sizes
        .windows(2)
        .enumerate()
        .map(|(i, pair)| {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let bound = 1.0 / libm::sqrt(fan_in as f64);
            let data = (0..fan_in * fan_out)
                .map(|_| rng.gen_range(-bound..bound))
                .collect();
            let activation = if i == hidden {
                Activation::Softmax
            } else if residual_skips.get(i).copied().unwrap_or(false) && fan_in == fan_out {
                Activation::ReluResidual
            } else {
                Activation::Relu
            };
            Layer {
                weights: Matrix::from_vec(fan_out, fan_in, data).expect("shape"),
                biases: vec![0.0; fan_out],
                activation,
            }
        })
        .collect();
    MlpModel::from_layers(layers)
}

/// A softmax output distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassProbabilities {
    pub probs: Vec<f64>,
}

impl ClassProbabilities {
    /// Softmax with the maximum logit subtracted first.
    pub fn from_logits(logits: &[f64]) -> Self {
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut probs: Vec<f64> = logits.iter().map(|&z| libm::exp(z - max)).collect();
        let total: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= total);
        ClassProbabilities { probs }
    }

    /// Highest-probability class; the lowest index wins ties.
    pub fn argmax(&self) -> usize {
        argmax(&self.probs)
    }
}

/// Index of the maximum; first occurrence on ties, 0 for an empty slice.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}
