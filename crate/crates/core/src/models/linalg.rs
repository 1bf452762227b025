//! Row-major dense kernels shared by the model implementations.
//!
//! Matrices are flat `&[f64]` slices in row-major order. All loops run in a
//! fixed order so results are bit-reproducible for a given build.

/// out[b x m] = x[b x n] . w[n x m] + bias (bias broadcast per row).
///
/// `out` is cleared and refilled. Zero inputs are skipped; MNIST-style data
/// is mostly zeros and the products they would contribute are exact zeros.
pub fn affine(x: &[f64], n: usize, w: &[f64], bias: &[f64], out: &mut Vec<f64>) {
    let m = bias.len();
    debug_assert_eq!(x.len() % n, 0);
    debug_assert_eq!(w.len(), n * m);
    let b = x.len() / n;
    out.clear();
    for _ in 0..b {
        out.extend_from_slice(bias);
    }
    for (x_row, out_row) in x.chunks_exact(n).zip(out.chunks_exact_mut(m)) {
        for (k, &xv) in x_row.iter().enumerate() {
            if xv == 0.0 {
                continue;
            }
            let w_row = &w[k * m..(k + 1) * m];
            for (o, &wv) in out_row.iter_mut().zip(w_row) {
                *o += xv * wv;
            }
        }
    }
}

/// dw[n x m] += x^T[n x b] . dz[b x m]; db[m] += column sums of dz.
pub fn accumulate_weight_grads(
    x: &[f64],
    n: usize,
    dz: &[f64],
    m: usize,
    dw: &mut [f64],
    db: &mut [f64],
) {
    debug_assert_eq!(dw.len(), n * m);
    debug_assert_eq!(db.len(), m);
    for (x_row, dz_row) in x.chunks_exact(n).zip(dz.chunks_exact(m)) {
        for (k, &xv) in x_row.iter().enumerate() {
            if xv == 0.0 {
                continue;
            }
            let dw_row = &mut dw[k * m..(k + 1) * m];
            for (d, &g) in dw_row.iter_mut().zip(dz_row) {
                *d += xv * g;
            }
        }
        for (d, &g) in db.iter_mut().zip(dz_row) {
            *d += g;
        }
    }
}

/// dx[b x n] = dz[b x m] . w^T[m x n]  (w stored row-major [n x m]).
pub fn backprop_inputs(dz: &[f64], m: usize, w: &[f64], n: usize, dx: &mut Vec<f64>) {
    debug_assert_eq!(dz.len() % m, 0);
    debug_assert_eq!(w.len(), n * m);
    let b = dz.len() / m;
    dx.clear();
    dx.reserve(b * n);
    for dz_row in dz.chunks_exact(m) {
        for k in 0..n {
            let w_row = &w[k * m..(k + 1) * m];
            let mut s = 0.0;
            for (&g, &wv) in dz_row.iter().zip(w_row) {
                s += g * wv;
            }
            dx.push(s);
        }
    }
}

/// Mean softmax cross-entropy over the rows of `logits`, log-sum-exp
/// stabilized. When `dlogits` is given it receives (softmax - onehot) / b,
/// the gradient of the mean loss with respect to the logits.
pub fn softmax_cross_entropy(
    logits: &[f64],
    labels: &[usize],
    num_classes: usize,
    mut dlogits: Option<&mut Vec<f64>>,
) -> f64 {
    let b = labels.len();
    debug_assert_eq!(logits.len(), b * num_classes);
    if let Some(d) = dlogits.as_deref_mut() {
        d.clear();
        d.reserve(b * num_classes);
    }
    let inv_b = 1.0 / b as f64;
    let mut total = 0.0;
    for (row, &label) in logits.chunks_exact(num_classes).zip(labels) {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum_exp = 0.0;
        for &z in row {
            sum_exp += (z - max).exp();
        }
        let lse = sum_exp.ln();
        total += lse + max - row[label];
        if let Some(d) = dlogits.as_deref_mut() {
            let inv_sum = 1.0 / sum_exp;
            for (j, &z) in row.iter().enumerate() {
                let p = (z - max).exp() * inv_sum;
                let y = if j == label { 1.0 } else { 0.0 };
                d.push((p - y) * inv_b);
            }
        }
    }
    total * inv_b
}

/// Index of the strictly largest entry; ties resolve to the lowest index.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (j, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = j;
        }
    }
    best
}

/// params -= lr * grad, in place.
pub fn axpy_neg(params: &mut [f64], grad: &[f64], lr: f64) {
    debug_assert_eq!(params.len(), grad.len());
    for (p, &g) in params.iter_mut().zip(grad) {
        *p -= lr * g;
    }
}
