//! One-hidden-layer MLP with ReLU activation.
//!
//! Parameter layout: `W1 [input_dim x hidden]`, `b1 [hidden]`,
//! `W2 [hidden x classes]`, `b2 [classes]`.

use super::{linalg, Batch, ModelConfig};

struct Split<'a> {
    w1: &'a [f64],
    b1: &'a [f64],
    w2: &'a [f64],
    b2: &'a [f64],
}

fn split<'a>(params: &'a [f64], config: &ModelConfig) -> Split<'a> {
    let d = config.input_dim();
    let h = config.hidden_dim();
    let k = config.num_classes();
    let (w1, rest) = params.split_at(d * h);
    let (b1, rest) = rest.split_at(h);
    let (w2, b2) = rest.split_at(h * k);
    Split { w1, b1, w2, b2 }
}

fn hidden_into(params: &Split, config: &ModelConfig, features: &[f64], hidden: &mut Vec<f64>) {
    linalg::affine(features, config.input_dim(), params.w1, params.b1, hidden);
    for v in hidden.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

pub(super) fn logits_into(
    params: &[f64],
    config: &ModelConfig,
    features: &[f64],
    out: &mut Vec<f64>,
) {
    let p = split(params, config);
    let mut hidden = Vec::new();
    hidden_into(&p, config, features, &mut hidden);
    linalg::affine(&hidden, config.hidden_dim(), p.w2, p.b2, out);
}

pub(super) fn backward(params: &[f64], config: &ModelConfig, batch: &Batch, grad: &mut [f64]) -> f64 {
    let d = config.input_dim();
    let h = config.hidden_dim();
    let k = config.num_classes();
    let p = split(params, config);

    let mut hidden = Vec::new();
    hidden_into(&p, config, batch.features(), &mut hidden);
    let mut logits = Vec::new();
    linalg::affine(&hidden, h, p.w2, p.b2, &mut logits);
    let mut dlogits = Vec::new();
    let loss = linalg::softmax_cross_entropy(&logits, batch.labels(), k, Some(&mut dlogits));

    let (dw1, rest) = grad.split_at_mut(d * h);
    let (db1, rest) = rest.split_at_mut(h);
    let (dw2, db2) = rest.split_at_mut(h * k);

    linalg::accumulate_weight_grads(&hidden, h, &dlogits, k, dw2, db2);

    // dz1 = (dlogits . W2^T) masked by ReLU'(z1); the stored activation is
    // the ReLU output, so the derivative is 1 exactly where it is positive.
    let mut dhidden = Vec::new();
    linalg::backprop_inputs(&dlogits, k, p.w2, h, &mut dhidden);
    for (dv, &a) in dhidden.iter_mut().zip(hidden.iter()) {
        if a <= 0.0 {
            *dv = 0.0;
        }
    }
    linalg::accumulate_weight_grads(batch.features(), d, &dhidden, h, dw1, db1);
    loss
}
