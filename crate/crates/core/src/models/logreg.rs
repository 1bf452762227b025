//! Multinomial logistic regression: a single affine map to class logits.
//!
//! Parameter layout: `W [input_dim x num_classes]` row-major, then `b
//! [num_classes]`.

use super::{linalg, Batch, ModelConfig};

fn split<'a>(params: &'a [f64], config: &ModelConfig) -> (&'a [f64], &'a [f64]) {
    params.split_at(config.input_dim() * config.num_classes())
}

pub(super) fn logits_into(
    params: &[f64],
    config: &ModelConfig,
    features: &[f64],
    out: &mut Vec<f64>,
) {
    let (w, b) = split(params, config);
    linalg::affine(features, config.input_dim(), w, b, out);
}

pub(super) fn backward(params: &[f64], config: &ModelConfig, batch: &Batch, grad: &mut [f64]) -> f64 {
    let d = config.input_dim();
    let k = config.num_classes();
    let (w, b) = split(params, config);

    let mut logits = Vec::new();
    linalg::affine(batch.features(), d, w, b, &mut logits);
    let mut dlogits = Vec::new();
    let loss = linalg::softmax_cross_entropy(&logits, batch.labels(), k, Some(&mut dlogits));

    let (dw, db) = grad.split_at_mut(d * k);
    linalg::accumulate_weight_grads(batch.features(), d, &dlogits, k, dw, db);
    loss
}
