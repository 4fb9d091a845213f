//! Backpropagation and seeded mini-batch gradient descent on mean softmax
//! cross-entropy.

use alloc::vec;
use alloc::vec::Vec;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{argmax, Activation, ClassifierError, MlpModel};
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Reshuffle sample order at the start of every epoch.
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 50,
            batch_size: 32,
            learning_rate: 0.001,
            seed: 0,
            shuffle: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ClassifierError> {
        if self.epochs == 0 {
            return Err(ClassifierError::InvalidConfig("epochs must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(ClassifierError::InvalidConfig(
                "batch size must be at least 1",
            ));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(ClassifierError::InvalidConfig(
                "learning rate must be positive",
            ));
        }
        Ok(())
    }
}

/// Mean loss and accuracy over one epoch, measured on each batch before its
/// update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    /// 1-based.
    pub epoch: usize,
    pub loss: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: MlpModel,
    pub history: Vec<EpochStats>,
}

/// Per-layer parameter gradients, shaped like the model.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    fn zeros_like(model: &MlpModel) -> Self {
        Gradients {
            weights: model
                .layers()
                .iter()
                .map(|l| Matrix::zeros(l.outputs(), l.inputs()))
                .collect(),
            biases: model
                .layers()
                .iter()
                .map(|l| vec![0.0; l.outputs()])
                .collect(),
        }
    }

    fn clear(&mut self) {
        self.weights
            .iter_mut()
            .for_each(|w| w.as_mut_slice().fill(0.0));
        self.biases.iter_mut().for_each(|b| b.fill(0.0));
    }

    fn scale(&mut self, k: f64) {
        for w in &mut self.weights {
            w.as_mut_slice().iter_mut().for_each(|v| *v *= k);
        }
        for b in &mut self.biases {
            b.iter_mut().for_each(|v| *v *= k);
        }
    }
}

/// Reusable per-sample buffers for forward and backward passes.
struct Workspace {
    /// `acts[0]` is the input; `acts[l + 1]` is layer `l`'s output (logits for
    /// the last layer).
    acts: Vec<Vec<f64>>,
    /// Hidden pre-activations, needed for the ReLU derivative.
    pre: Vec<Vec<f64>>,
    delta: Vec<f64>,
    delta_prev: Vec<f64>,
    skip: Vec<f64>,
}

impl Workspace {
    fn new(model: &MlpModel) -> Self {
        let sizes = model.layer_sizes();
        let widest = sizes.iter().copied().max().unwrap_or(0);
        Workspace {
            acts: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            pre: sizes[1..].iter().map(|&n| vec![0.0; n]).collect(),
            delta: Vec::with_capacity(widest),
            delta_prev: Vec::with_capacity(widest),
            skip: Vec::with_capacity(widest),
        }
    }

    /// Accumulates one sample's cross-entropy gradient into `grads` and
    /// returns `(loss, predicted class)`.
    fn accumulate(
        &mut self,
        model: &MlpModel,
        input: &[f64],
        label: usize,
        grads: &mut Gradients,
    ) -> (f64, usize) {
        let layers = model.layers();
        self.acts[0].copy_from_slice(input);
        for (l, layer) in layers.iter().enumerate() {
            let (before, after) = self.acts.split_at_mut(l + 1);
            let (h, out) = (&before[l], &mut after[0]);
            layer.weights.mul_vec_into(h, out);
            for (o, b) in out.iter_mut().zip(&layer.biases) {
                *o += b;
            }
            match layer.activation {
                Activation::Softmax => {}
                Activation::Relu => {
                    self.pre[l].copy_from_slice(out);
                    out.iter_mut().for_each(|v| *v = v.max(0.0));
                }
                Activation::ReluResidual => {
                    self.pre[l].copy_from_slice(out);
                    for (o, hi) in out.iter_mut().zip(h) {
                        *o = o.max(0.0) + hi;
                    }
                }
            }
        }

        let logits = &self.acts[layers.len()];
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum_exp: f64 = logits.iter().map(|&z| libm::exp(z - max)).sum();
        let loss = max + libm::log(sum_exp) - logits[label];
        let predicted = argmax(logits);

        // d loss / d logits = softmax − one-hot.
        self.delta.clear();
        self.delta
            .extend(logits.iter().map(|&z| libm::exp(z - max) / sum_exp));
        self.delta[label] -= 1.0;

        for l in (0..layers.len()).rev() {
            let layer = &layers[l];
            let residual = layer.activation == Activation::ReluResidual;
            if residual {
                self.skip.clear();
                self.skip.extend_from_slice(&self.delta);
            }
            if l + 1 < layers.len() {
                // `delta` holds d loss / d output; move it through the ReLU.
                for (d, &z) in self.delta.iter_mut().zip(&self.pre[l]) {
                    if z <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
            let h = &self.acts[l];
            let gw = &mut grads.weights[l];
            for (j, &d) in self.delta.iter().enumerate() {
                if d != 0.0 {
                    for (g, &x) in gw.row_mut(j).iter_mut().zip(h) {
                        *g += d * x;
                    }
                }
            }
            for (g, &d) in grads.biases[l].iter_mut().zip(&self.delta) {
                *g += d;
            }
            if l == 0 {
                break;
            }
            self.delta_prev.clear();
            if residual {
                // The identity skip passes the unmasked output gradient through.
                self.delta_prev.extend_from_slice(&self.skip);
            } else {
                self.delta_prev.resize(layer.inputs(), 0.0);
            }
            for (j, &d) in self.delta.iter().enumerate() {
                if d != 0.0 {
                    for (p, &w) in self.delta_prev.iter_mut().zip(layer.weights.row(j)) {
                        *p += d * w;
                    }
                }
            }
            core::mem::swap(&mut self.delta, &mut self.delta_prev);
        }
        (loss, predicted)
    }
}

/// Mean cross-entropy over `(inputs, labels)` and its gradient with respect
/// to every parameter.
pub fn loss_and_gradients(
    model: &MlpModel,
    inputs: &Matrix,
    labels: &[usize],
) -> Result<(f64, Gradients), ClassifierError> {
    check_dataset(model, inputs, labels)?;
    let mut ws = Workspace::new(model);
    let mut grads = Gradients::zeros_like(model);
    let mut total = 0.0;
    for (x, &y) in inputs.iter_rows().zip(labels) {
        total += ws.accumulate(model, x, y, &mut grads).0;
    }
    let n = labels.len() as f64;
    grads.scale(1.0 / n);
    Ok((total / n, grads))
}

fn check_dataset(
    model: &MlpModel,
    inputs: &Matrix,
    labels: &[usize],
) -> Result<(), ClassifierError> {
    if inputs.rows() == 0 {
        return Err(ClassifierError::EmptyDataset);
    }
    if inputs.rows() != labels.len() {
        return Err(ClassifierError::LabelCount {
            features: inputs.rows(),
            labels: labels.len(),
        });
    }
    if inputs.cols() != model.input_width() {
        return Err(ClassifierError::DimensionMismatch {
            expected: model.input_width(),
            actual: inputs.cols(),
        });
    }
    let classes = model.num_classes();
    if let Some(&label) = labels.iter().find(|&&l| l >= classes) {
        return Err(ClassifierError::LabelOutOfRange { label, classes });
    }
    if !inputs.as_slice().iter().all(|v| v.is_finite()) {
        return Err(ClassifierError::NonFiniteInput);
    }
    Ok(())
}

/// Trains a copy of `model` with plain mini-batch gradient descent.
///
/// Single-threaded and fully determined by `(model, data, config)`.
pub fn train(
    model: &MlpModel,
    features: &Matrix,
    labels: &[usize],
    config: &TrainConfig,
) -> Result<TrainOutcome, ClassifierError> {
    config.validate()?;
    check_dataset(model, features, labels)?;
    let mut model = model.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..labels.len()).collect();
    let mut ws = Workspace::new(&model);
    let mut grads = Gradients::zeros_like(&model);
    let mut history = Vec::with_capacity(config.epochs);

    for epoch in 1..=config.epochs {
        if config.shuffle {
            order.shuffle(&mut rng);
        }
        let mut epoch_loss = 0.0;
        let mut correct = 0usize;
        for (batch, chunk) in order.chunks(config.batch_size).enumerate() {
            grads.clear();
            let mut batch_loss = 0.0;
            for &i in chunk {
                let (loss, predicted) =
                    ws.accumulate(&model, features.row(i), labels[i], &mut grads);
                batch_loss += loss;
                correct += usize::from(predicted == labels[i]);
            }
            if !batch_loss.is_finite() {
                return Err(ClassifierError::NonFiniteLoss { epoch, batch });
            }
            epoch_loss += batch_loss;
            let step = config.learning_rate / chunk.len() as f64;
            for (layer, (gw, gb)) in model
                .layers_mut()
                .iter_mut()
                .zip(grads.weights.iter().zip(&grads.biases))
            {
                for (w, g) in layer.weights.as_mut_slice().iter_mut().zip(gw.as_slice()) {
                    *w -= step * g;
                }
                for (b, g) in layer.biases.iter_mut().zip(gb) {
                    *b -= step * g;
                }
            }
        }
        let n = labels.len() as f64;
        history.push(EpochStats {
            epoch,
            loss: epoch_loss / n,
            accuracy: correct as f64 / n,
        });
    }
    Ok(TrainOutcome { model, history })
}

#[cfg(test)]
mod tests {
    use super::super::init_network;
    use super::*;
    use rand::Rng;

    fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
        // Box-Muller.
        let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
        let u2: f64 = rng.gen();
        libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(2.0 * core::f64::consts::PI * u2)
    }

    /// 200 points, two unit-variance blobs centered at (±2.5, ±2.5).
    fn blobs(seed: u64) -> (Matrix, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..200 {
            let label = i % 2;
            let c = if label == 0 { -2.5 } else { 2.5 };
            rows.push([c + gaussian(&mut rng), c + gaussian(&mut rng)]);
            labels.push(label);
        }
        (Matrix::from_rows(&rows).unwrap(), labels)
    }

    fn accuracy(model: &MlpModel, x: &Matrix, y: &[usize]) -> f64 {
        let correct = x
            .iter_rows()
            .zip(y)
            .filter(|(r, &l)| model.predict(r).unwrap() == l)
            .count();
        correct as f64 / y.len() as f64
    }

    fn random_inputs(rng: &mut ChaCha8Rng, n: usize, width: usize) -> Matrix {
        let data = (0..n * width).map(|_| rng.gen_range(-1.0..1.0)).collect();
        Matrix::from_vec(n, width, data).unwrap()
    }

    fn check_gradients(model: &MlpModel, inputs: &Matrix, labels: &[usize]) {
        let (_, analytic) = loss_and_gradients(model, inputs, labels).unwrap();
        let h = 1e-4;
        let loss_at = |m: &MlpModel| loss_and_gradients(m, inputs, labels).unwrap().0;
        let rel = |a: f64, n: f64| (a - n).abs() / a.abs().max(n.abs()).max(1e-6);
        let mut worst = 0.0f64;
        for l in 0..model.layers().len() {
            for k in 0..model.layers()[l].weights.as_slice().len() {
                let mut plus = model.clone();
                plus.layers_mut()[l].weights.as_mut_slice()[k] += h;
                let mut minus = model.clone();
                minus.layers_mut()[l].weights.as_mut_slice()[k] -= h;
                let numeric = (loss_at(&plus) - loss_at(&minus)) / (2.0 * h);
                worst = worst.max(rel(analytic.weights[l].as_slice()[k], numeric));
            }
            for k in 0..model.layers()[l].biases.len() {
                let mut plus = model.clone();
                plus.layers_mut()[l].biases[k] += h;
                let mut minus = model.clone();
                minus.layers_mut()[l].biases[k] -= h;
                let numeric = (loss_at(&plus) - loss_at(&minus)) / (2.0 * h);
                worst = worst.max(rel(analytic.biases[l][k], numeric));
            }
        }
        assert!(worst < 1e-4, "worst relative gradient error {worst}");
    }

    #[test]
    fn gradients_match_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let model = init_network(&[8, 16, 10], &[], 3).unwrap();
        let inputs = random_inputs(&mut rng, 20, 8);
        let labels: Vec<usize> = (0..20).map(|_| rng.gen_range(0..10)).collect();
        check_gradients(&model, &inputs, &labels);
    }

    #[test]
    fn residual_gradients_match_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let model = init_network(&[6, 9, 9, 4], &[false, true], 8).unwrap();
        assert_eq!(model.residual_skips(), vec![false, true]);
        let inputs = random_inputs(&mut rng, 12, 6);
        let labels: Vec<usize> = (0..12).map(|_| rng.gen_range(0..4)).collect();
        check_gradients(&model, &inputs, &labels);
    }

    #[test]
    fn separable_blobs_with_default_hyperparameters() {
        let (x, y) = blobs(2024);
        let model = init_network(&[2, 512, 256, 2], &[], 1).unwrap();
        let config = TrainConfig {
            seed: 9,
            ..TrainConfig::default()
        };
        let out = train(&model, &x, &y, &config).unwrap();
        assert_eq!(out.history.len(), config.epochs);
        assert!(out.history.last().unwrap().loss < out.history[0].loss);
        let acc = accuracy(&out.model, &x, &y);
        assert!(acc >= 0.95, "train accuracy {acc}");
    }

    #[test]
    fn training_is_deterministic() {
        let (x, y) = blobs(1);
        let model = init_network(&[2, 16, 2], &[], 4).unwrap();
        let config = TrainConfig {
            epochs: 5,
            batch_size: 7,
            seed: 77,
            ..TrainConfig::default()
        };
        let a = train(&model, &x, &y, &config).unwrap();
        let b = train(&model, &x, &y, &config).unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(a.history, b.history);
        let c = train(&model, &x, &y, &TrainConfig { seed: 78, ..config }).unwrap();
        assert_ne!(a.model, c.model);
    }

    #[test]
    fn training_errors() {
        let model = init_network(&[2, 4, 2], &[], 0).unwrap();
        let empty = Matrix::zeros(0, 2);
        let cfg = TrainConfig::default();
        assert_eq!(
            train(&model, &empty, &[], &cfg).unwrap_err(),
            ClassifierError::EmptyDataset
        );
        let x = Matrix::zeros(3, 3);
        assert!(matches!(
            train(&model, &x, &[0, 1, 0], &cfg),
            Err(ClassifierError::DimensionMismatch { .. })
        ));
        let x = Matrix::zeros(3, 2);
        assert!(matches!(
            train(&model, &x, &[0, 1], &cfg),
            Err(ClassifierError::LabelCount { .. })
        ));
        assert!(matches!(
            train(&model, &x, &[0, 1, 2], &cfg),
            Err(ClassifierError::LabelOutOfRange {
                label: 2,
                classes: 2
            })
        ));
        assert!(train(
            &model,
            &x,
            &[0, 1, 0],
            &TrainConfig {
                epochs: 0,
                ..cfg.clone()
            }
        )
        .is_err());
        assert!(train(
            &model,
            &x,
            &[0, 1, 0],
            &TrainConfig {
                batch_size: 0,
                ..cfg.clone()
            }
        )
        .is_err());
        assert!(train(
            &model,
            &x,
            &[0, 1, 0],
            &TrainConfig {
                learning_rate: 0.0,
                ..cfg
            }
        )
        .is_err());
    }

    #[test]
    fn diverging_run_reports_epoch_and_batch() {
        let model = init_network(&[1, 4, 2], &[], 0).unwrap();
        let x = Matrix::from_rows(&[[1e150], [-1e150]]).unwrap();
        let cfg = TrainConfig {
            learning_rate: 1e10,
            batch_size: 1,
            shuffle: false,
            ..TrainConfig::default()
        };
        let err = train(&model, &x, &[0, 1], &cfg).unwrap_err();
        assert!(
            matches!(err, ClassifierError::NonFiniteLoss { epoch: 2, batch: 0 }),
            "{err:?}"
        );
    }
}
