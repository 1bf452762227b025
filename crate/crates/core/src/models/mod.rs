//! Trainable models with analytic gradients and mini-batch SGD.
//!
//! Three kinds are registered: multinomial logistic regression (`logreg`), a
//! one-hidden-layer ReLU MLP (`mlp`), and a small two-block CNN (`cnn-small`).
//! All share the same flat [`ParameterVector`] representation — the unit of
//! aggregation and communication — whose layout is fixed by the
//! [`ModelConfig`] alone. Loss is mean softmax cross-entropy; the optimizer
//! is plain SGD.
//!
//! Every operation here is a pure function of its arguments (including the
//! seed) and never mutates its inputs.

mod cnn;
pub(crate) mod linalg;
mod logreg;
mod mlp;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng::{rng_from, STREAM_EPOCH, STREAM_INIT};
use rand::seq::SliceRandom;
use rand::Rng;

/// Which architecture a [`ModelConfig`] describes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    Logreg,
    Mlp,
    CnnSmall,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Logreg => "logreg",
            ModelKind::Mlp => "mlp",
            ModelKind::CnnSmall => "cnn-small",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logreg" => Ok(ModelKind::Logreg),
            "mlp" => Ok(ModelKind::Mlp),
            "cnn-small" => Ok(ModelKind::CnnSmall),
            other => Err(Error::invalid_config(format!(
                "unknown model kind '{other}' (expected logreg|mlp|cnn-small)"
            ))),
        }
    }
}

/// Image geometry for the CNN, inferred from `input_dim`.
///
/// Inputs are channel-major `[channels][height][width]`, matching how the
/// MNIST and CIFAR-10 loaders lay out pixels.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct ImageShape {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

/// Validated model description. The parameter count and layout are derivable
/// from the config alone: the same config always produces the same layout.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModelConfig {
    kind: ModelKind,
    input_dim: usize,
    num_classes: usize,
    hidden_dim: usize,
    conv_channels: usize,
    image: Option<ImageShape>,
}

impl ModelConfig {
    /// Multinomial logistic regression: one affine map to class logits.
    pub fn logreg(input_dim: usize, num_classes: usize) -> Result<Self> {
        Self::validate_common(input_dim, num_classes)?;
        Ok(ModelConfig {
            kind: ModelKind::Logreg,
            input_dim,
            num_classes,
            hidden_dim: 0,
            conv_channels: 0,
            image: None,
        })
    }

    /// One ReLU hidden layer of `hidden_dim` units, then an affine output.
    pub fn mlp(input_dim: usize, hidden_dim: usize, num_classes: usize) -> Result<Self> {
        Self::validate_common(input_dim, num_classes)?;
        if hidden_dim == 0 {
            return Err(Error::invalid_config("mlp hidden_dim must be >= 1"));
        }
        Ok(ModelConfig {
            kind: ModelKind::Mlp,
            input_dim,
            num_classes,
            hidden_dim,
            conv_channels: 0,
            image: None,
        })
    }

    /// Two 3x3 convolution blocks (`conv_channels` then `2*conv_channels`
    /// channels, ReLU, 2x2 max-pool each) and a dense output layer.
    ///
    /// The image geometry is inferred from `input_dim`: grayscale if it is a
    /// perfect square, RGB if `input_dim / 3` is. Sides must be at least 4 so
    /// both pools leave a non-empty map.
    pub fn cnn_small(input_dim: usize, conv_channels: usize, num_classes: usize) -> Result<Self> {
        Self::validate_common(input_dim, num_classes)?;
        if conv_channels == 0 {
            return Err(Error::invalid_config("cnn-small conv_channels must be >= 1"));
        }
        let image = infer_image_shape(input_dim)?;
        if image.height < 4 || image.width < 4 {
            return Err(Error::invalid_config(format!(
                "cnn-small needs images at least 4x4, got {}x{}",
                image.height, image.width
            )));
        }
        Ok(ModelConfig {
            kind: ModelKind::CnnSmall,
            input_dim,
            num_classes,
            hidden_dim: 0,
            conv_channels,
            image: Some(image),
        })
    }

    fn validate_common(input_dim: usize, num_classes: usize) -> Result<()> {
        if input_dim == 0 {
            return Err(Error::invalid_config("input_dim must be >= 1"));
        }
        if num_classes < 2 {
            return Err(Error::invalid_config("num_classes must be >= 2"));
        }
        Ok(())
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    pub fn conv_channels(&self) -> usize {
        self.conv_channels
    }

    pub(crate) fn image(&self) -> Option<ImageShape> {
        self.image
    }

    /// Total number of trainable parameters implied by this config.
    pub fn param_count(&self) -> usize {
        match self.kind {
            ModelKind::Logreg => self.input_dim * self.num_classes + self.num_classes,
            ModelKind::Mlp => {
                self.input_dim * self.hidden_dim
                    + self.hidden_dim
                    + self.hidden_dim * self.num_classes
                    + self.num_classes
            }
            ModelKind::CnnSmall => cnn::param_count(self),
        }
    }
}

fn infer_image_shape(input_dim: usize) -> Result<ImageShape> {
    let square = |dim: usize| {
        let s = (dim as f64).sqrt().round() as usize;
        (s * s == dim).then_some(s)
    };
    if let Some(s) = square(input_dim) {
        return Ok(ImageShape {
            channels: 1,
            height: s,
            width: s,
        });
    }
    if input_dim % 3 == 0 {
        if let Some(s) = square(input_dim / 3) {
            return Ok(ImageShape {
                channels: 3,
                height: s,
                width: s,
            });
        }
    }
    Err(Error::invalid_config(format!(
        "cannot infer an image shape from input_dim {input_dim}"
    )))
}

/// Flat vector of all trainable parameters; the object that is trained,
/// transmitted, and averaged. Layout is implicit, fixed by the model config.
#[derive(Clone, Debug, PartialEq)]
pub struct ParameterVector {
    values: Vec<f64>,
}

impl ParameterVector {
    pub fn from_values(values: Vec<f64>) -> Self {
        ParameterVector { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// A mini-batch of training rows: row-major features and class labels.
#[derive(Clone, Debug)]
pub struct Batch {
    features: Vec<f64>,
    labels: Vec<usize>,
    input_dim: usize,
}

impl Batch {
    pub fn new(features: Vec<f64>, labels: Vec<usize>, input_dim: usize) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::invalid_input("batch must contain at least one row"));
        }
        if features.len() != labels.len() * input_dim {
            return Err(Error::invalid_input(format!(
                "feature buffer holds {} values, expected {} rows x {} dims",
                features.len(),
                labels.len(),
                input_dim
            )));
        }
        Ok(Batch {
            features,
            labels,
            input_dim,
        })
    }

    /// Gather the given dataset rows into a fresh batch.
    pub fn from_dataset(data: &Dataset, indices: &[usize]) -> Result<Self> {
        let mut batch = Batch {
            features: Vec::new(),
            labels: Vec::new(),
            input_dim: data.num_features(),
        };
        batch.gather_from(data, indices)?;
        Ok(batch)
    }

    /// Refill this batch from dataset rows, reusing the buffers.
    pub(crate) fn gather_from(&mut self, data: &Dataset, indices: &[usize]) -> Result<()> {
        if indices.is_empty() {
            return Err(Error::invalid_input("batch must contain at least one row"));
        }
        let d = data.num_features();
        self.input_dim = d;
        self.features.clear();
        self.labels.clear();
        for &i in indices {
            if i >= data.len() {
                return Err(Error::invalid_input(format!(
                    "row index {i} out of range for dataset of {} rows",
                    data.len()
                )));
            }
            self.features.extend_from_slice(data.row(i));
            self.labels.push(data.label(i));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }
}

/// Accuracy and mean loss over a dataset.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Evaluation {
    pub accuracy: f64,
    pub mean_loss: f64,
}

/// Deterministic initialization: weights uniform in (-s, s) with
/// s = sqrt(6 / (fan_in + fan_out)) per layer, biases zero.
pub fn init_params(config: &ModelConfig, seed: u64) -> ParameterVector {
    let mut rng = rng_from(&[seed, STREAM_INIT]);
    let mut values = vec![0.0; config.param_count()];
    let mut fill = |dst: &mut [f64], fan_in: usize, fan_out: usize| {
        let s = (6.0 / (fan_in + fan_out) as f64).sqrt();
        for v in dst {
            *v = rng.random_range(-s..s);
        }
    };
    match config.kind {
        ModelKind::Logreg => {
            let (d, k) = (config.input_dim, config.num_classes);
            fill(&mut values[..d * k], d, k);
        }
        ModelKind::Mlp => {
            let (d, h, k) = (config.input_dim, config.hidden_dim, config.num_classes);
            let (w1, rest) = values.split_at_mut(d * h);
            fill(w1, d, h);
            let w2 = &mut rest[h..h + h * k];
            fill(w2, h, k);
        }
        ModelKind::CnnSmall => cnn::init_weights(config, &mut values, &mut fill),
    }
    ParameterVector::from_values(values)
}

fn check_params(params: &ParameterVector, config: &ModelConfig) -> Result<()> {
    if params.len() != config.param_count() {
        return Err(Error::invalid_input(format!(
            "parameter vector has {} entries, config implies {}",
            params.len(),
            config.param_count()
        )));
    }
    Ok(())
}

fn check_batch(batch: &Batch, config: &ModelConfig) -> Result<()> {
    if batch.input_dim() != config.input_dim {
        return Err(Error::invalid_input(format!(
            "batch width {} does not match model input_dim {}",
            batch.input_dim(),
            config.input_dim
        )));
    }
    if let Some(&bad) = batch.labels().iter().find(|&&l| l >= config.num_classes) {
        return Err(Error::invalid_input(format!(
            "label {bad} out of range for {} classes",
            config.num_classes
        )));
    }
    Ok(())
}

fn logits_into(params: &[f64], config: &ModelConfig, features: &[f64], out: &mut Vec<f64>) {
    match config.kind {
        ModelKind::Logreg => logreg::logits_into(params, config, features, out),
        ModelKind::Mlp => mlp::logits_into(params, config, features, out),
        ModelKind::CnnSmall => cnn::logits_into(params, config, features, out),
    }
}

/// Class logits for a row-major feature matrix `[b x input_dim]`.
pub fn predict_logits(
    params: &ParameterVector,
    config: &ModelConfig,
    features: &[f64],
) -> Result<Vec<f64>> {
    check_params(params, config)?;
    if features.is_empty() || features.len() % config.input_dim != 0 {
        return Err(Error::invalid_input(format!(
            "feature buffer of {} values is not a non-empty multiple of input_dim {}",
            features.len(),
            config.input_dim
        )));
    }
    let mut out = Vec::new();
    logits_into(params.values(), config, features, &mut out);
    Ok(out)
}

/// Mean softmax cross-entropy of the batch, log-sum-exp stabilized.
pub fn loss(params: &ParameterVector, config: &ModelConfig, batch: &Batch) -> Result<f64> {
    check_params(params, config)?;
    check_batch(batch, config)?;
    let mut logits = Vec::new();
    logits_into(params.values(), config, batch.features(), &mut logits);
    Ok(linalg::softmax_cross_entropy(
        &logits,
        batch.labels(),
        config.num_classes,
        None,
    ))
}

/// Gradient of the mean-batch loss, same length and layout as `params`.
pub fn gradient(
    params: &ParameterVector,
    config: &ModelConfig,
    batch: &Batch,
) -> Result<ParameterVector> {
    check_params(params, config)?;
    check_batch(batch, config)?;
    let mut grad = Vec::new();
    backward_into(params.values(), config, batch, &mut grad);
    Ok(ParameterVector::from_values(grad))
}

/// Compute the mean-loss gradient into `grad` (resized and overwritten).
/// Returns the batch loss. Callers must have validated shapes.
fn backward_into(params: &[f64], config: &ModelConfig, batch: &Batch, grad: &mut Vec<f64>) -> f64 {
    grad.clear();
    grad.resize(params.len(), 0.0);
    match config.kind {
        ModelKind::Logreg => logreg::backward(params, config, batch, grad),
        ModelKind::Mlp => mlp::backward(params, config, batch, grad),
        ModelKind::CnnSmall => cnn::backward(params, config, batch, grad),
    }
}

/// One plain SGD step: `params - lr * grad`, elementwise.
///
/// Note that two steps of `lr/2` with the gradient recomputed in between do
/// not generally equal one step of `lr`; the loss surface is not linear.
pub fn sgd_step(params: &ParameterVector, grad: &ParameterVector, lr: f64) -> ParameterVector {
    assert_eq!(
        params.len(),
        grad.len(),
        "sgd_step requires matching parameter and gradient layouts"
    );
    let values = params
        .values()
        .iter()
        .zip(grad.values())
        .map(|(&p, &g)| p - lr * g)
        .collect();
    ParameterVector::from_values(values)
}

/// Run `epochs` passes of mini-batch SGD over `data`, reshuffling each epoch
/// with an RNG keyed by `(seed, epoch)`. The input parameters are not
/// modified; the trained vector is returned.
pub fn train_local(
    params: &ParameterVector,
    config: &ModelConfig,
    data: &Dataset,
    epochs: usize,
    batch_size: usize,
    lr: f64,
    seed: u64,
) -> Result<ParameterVector> {
    check_params(params, config)?;
    check_dataset(data, config)?;
    if epochs == 0 {
        return Err(Error::invalid_input("epochs must be >= 1"));
    }
    if batch_size == 0 {
        return Err(Error::invalid_input("batch_size must be >= 1"));
    }

    let mut work = params.values().to_vec();
    let mut grad: Vec<f64> = Vec::with_capacity(work.len());
    let mut batch = Batch {
        features: Vec::new(),
        labels: Vec::new(),
        input_dim: config.input_dim,
    };
    let mut indices: Vec<usize> = (0..data.len()).collect();

    for epoch in 0..epochs {
        let mut rng = rng_from(&[seed, STREAM_EPOCH, epoch as u64]);
        indices.shuffle(&mut rng);
        for chunk in indices.chunks(batch_size) {
            batch.gather_from(data, chunk)?;
            backward_into(&work, config, &batch, &mut grad);
            linalg::axpy_neg(&mut work, &grad, lr);
        }
    }
    debug_assert!(work.iter().all(|v| v.is_finite()));
    Ok(ParameterVector::from_values(work))
}

fn check_dataset(data: &Dataset, config: &ModelConfig) -> Result<()> {
    if data.num_features() != config.input_dim {
        return Err(Error::invalid_input(format!(
            "dataset width {} does not match model input_dim {}",
            data.num_features(),
            config.input_dim
        )));
    }
    if data.num_classes() > config.num_classes {
        return Err(Error::invalid_input(format!(
            "dataset has {} classes but the model only {}",
            data.num_classes(),
            config.num_classes
        )));
    }
    Ok(())
}

/// Accuracy (argmax of the logits, ties to the lowest class index) and mean
/// loss over a dataset, evaluated in fixed-size chunks.
pub fn evaluate(params: &ParameterVector, config: &ModelConfig, data: &Dataset) -> Result<Evaluation> {
    const CHUNK_ROWS: usize = 512;

    check_params(params, config)?;
    check_dataset(data, config)?;

    let d = config.input_dim;
    let k = config.num_classes;
    let mut logits = Vec::new();
    let mut correct = 0usize;
    let mut loss_sum = 0.0;
    let n = data.len();
    let mut start = 0;
    while start < n {
        let end = (start + CHUNK_ROWS).min(n);
        let rows = end - start;
        let features = &data.features()[start * d..end * d];
        let labels = &data.labels()[start..end];
        logits_into(params.values(), config, features, &mut logits);
        loss_sum += linalg::softmax_cross_entropy(&logits, labels, k, None) * rows as f64;
        for (row, &label) in logits.chunks_exact(k).zip(labels) {
            if linalg::argmax(row) == label {
                correct += 1;
            }
        }
        start = end;
    }
    Ok(Evaluation {
        accuracy: correct as f64 / n as f64,
        mean_loss: loss_sum / n as f64,
    })
}
