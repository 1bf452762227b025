//! Small CNN: two 3x3 convolution blocks (ReLU, 2x2 max-pool) and a dense
//! output layer. The first block has `conv_channels` output channels, the
//! second twice that.
//!
//! Inputs are channel-major `[channels][height][width]`. Convolutions use
//! zero padding of 1 and stride 1, so they preserve the spatial size; pools
//! halve it with floor division (odd trailing rows/columns are dropped).
//!
//! Parameter layout: `convW1 [c1 x c_in x 3 x 3]`, `convB1 [c1]`,
//! `convW2 [c2 x c1 x 3 x 3]`, `convB2 [c2]`, `denseW [flat x classes]`,
//! `denseB [classes]`.

use super::{linalg, Batch, ImageShape, ModelConfig};

struct Geometry {
    image: ImageShape,
    c1: usize,
    c2: usize,
    // spatial size after the first pool; the second pool halves it again
    h1: usize,
    w1: usize,
    flat: usize,
}

fn geometry(config: &ModelConfig) -> Geometry {
    let image = config.image().expect("cnn config carries an image shape");
    let c1 = config.conv_channels();
    let c2 = 2 * c1;
    let (h1, w1) = (image.height / 2, image.width / 2);
    Geometry {
        image,
        c1,
        c2,
        h1,
        w1,
        flat: c2 * (h1 / 2) * (w1 / 2),
    }
}

pub(super) fn param_count(config: &ModelConfig) -> usize {
    let g = geometry(config);
    let k = config.num_classes();
    g.c1 * g.image.channels * 9 + g.c1 + g.c2 * g.c1 * 9 + g.c2 + g.flat * k + k
}

struct Split<'a> {
    w1: &'a [f64],
    b1: &'a [f64],
    w2: &'a [f64],
    b2: &'a [f64],
    wd: &'a [f64],
    bd: &'a [f64],
}

fn split<'a>(params: &'a [f64], g: &Geometry, k: usize) -> Split<'a> {
    let (w1, rest) = params.split_at(g.c1 * g.image.channels * 9);
    let (b1, rest) = rest.split_at(g.c1);
    let (w2, rest) = rest.split_at(g.c2 * g.c1 * 9);
    let (b2, rest) = rest.split_at(g.c2);
    let (wd, bd) = rest.split_at(g.flat * k);
    Split { w1, b1, w2, b2, wd, bd }
}

pub(super) fn init_weights(
    config: &ModelConfig,
    values: &mut [f64],
    fill: &mut dyn FnMut(&mut [f64], usize, usize),
) {
    let g = geometry(config);
    let k = config.num_classes();
    let c_in = g.image.channels;
    let (w1, rest) = values.split_at_mut(g.c1 * c_in * 9);
    fill(w1, c_in * 9, g.c1 * 9);
    let rest = &mut rest[g.c1..];
    let (w2, rest) = rest.split_at_mut(g.c2 * g.c1 * 9);
    fill(w2, g.c1 * 9, g.c2 * 9);
    let rest = &mut rest[g.c2..];
    let (wd, _) = rest.split_at_mut(g.flat * k);
    fill(wd, g.flat, k);
}

/// out[oc][y][x] = bias[oc] + sum over (ic, ky, kx) of shifted input values.
fn conv3x3(
    input: &[f64],
    c_in: usize,
    h: usize,
    w: usize,
    weights: &[f64],
    bias: &[f64],
    c_out: usize,
    out: &mut [f64],
) {
    for oc in 0..c_out {
        let out_plane = &mut out[oc * h * w..(oc + 1) * h * w];
        out_plane.fill(bias[oc]);
        for ic in 0..c_in {
            let in_plane = &input[ic * h * w..(ic + 1) * h * w];
            let w_base = (oc * c_in + ic) * 9;
            for ky in 0..3usize {
                let dy = ky as isize - 1;
                for kx in 0..3usize {
                    let dx = kx as isize - 1;
                    let wv = weights[w_base + ky * 3 + kx];
                    let (y0, y1) = shift_range(h, dy);
                    let (x0, x1) = shift_range(w, dx);
                    for y in y0..y1 {
                        let iy = (y as isize + dy) as usize;
                        for x in x0..x1 {
                            let ix = (x as isize + dx) as usize;
                            out_plane[y * w + x] += wv * in_plane[iy * w + ix];
                        }
                    }
                }
            }
        }
    }
}

/// Valid output coordinates for a kernel offset `d` on an axis of length `n`.
fn shift_range(n: usize, d: isize) -> (usize, usize) {
    if d < 0 {
        ((-d) as usize, n)
    } else {
        (0, n - d as usize)
    }
}

/// Accumulate weight/bias gradients and (optionally) input gradients for a
/// 3x3 same-padding convolution.
#[allow(clippy::too_many_arguments)]
fn conv3x3_backward(
    input: &[f64],
    c_in: usize,
    h: usize,
    w: usize,
    weights: &[f64],
    c_out: usize,
    dz: &[f64],
    dw: &mut [f64],
    db: &mut [f64],
    mut dinput: Option<&mut [f64]>,
) {
    if let Some(d) = dinput.as_deref_mut() {
        d.fill(0.0);
    }
    for oc in 0..c_out {
        let dz_plane = &dz[oc * h * w..(oc + 1) * h * w];
        db[oc] += dz_plane.iter().sum::<f64>();
        for ic in 0..c_in {
            let in_plane = &input[ic * h * w..(ic + 1) * h * w];
            let w_base = (oc * c_in + ic) * 9;
            for ky in 0..3usize {
                let dy = ky as isize - 1;
                for kx in 0..3usize {
                    let dx = kx as isize - 1;
                    let (y0, y1) = shift_range(h, dy);
                    let (x0, x1) = shift_range(w, dx);
                    let mut acc = 0.0;
                    for y in y0..y1 {
                        let iy = (y as isize + dy) as usize;
                        for x in x0..x1 {
                            let ix = (x as isize + dx) as usize;
                            acc += dz_plane[y * w + x] * in_plane[iy * w + ix];
                        }
                    }
                    dw[w_base + ky * 3 + kx] += acc;
                    if let Some(d) = dinput.as_deref_mut() {
                        let d_plane = &mut d[ic * h * w..(ic + 1) * h * w];
                        let wv = weights[w_base + ky * 3 + kx];
                        for y in y0..y1 {
                            let iy = (y as isize + dy) as usize;
                            for x in x0..x1 {
                                let ix = (x as isize + dx) as usize;
                                d_plane[iy * w + ix] += wv * dz_plane[y * w + x];
                            }
                        }
                    }
                }
            }
        }
    }
}

/// 2x2 max-pool with stride 2; records the flat input index of each winner.
/// Ties resolve to the first candidate in row-major order.
fn maxpool2(input: &[f64], c: usize, h: usize, w: usize, out: &mut [f64], winners: &mut [usize]) {
    let (ph, pw) = (h / 2, w / 2);
    let mut o = 0;
    for ch in 0..c {
        let plane = &input[ch * h * w..(ch + 1) * h * w];
        for py in 0..ph {
            for px in 0..pw {
                let (y, x) = (py * 2, px * 2);
                let mut best_idx = y * w + x;
                let mut best = plane[best_idx];
                for (yy, xx) in [(y, x + 1), (y + 1, x), (y + 1, x + 1)] {
                    let idx = yy * w + xx;
                    if plane[idx] > best {
                        best = plane[idx];
                        best_idx = idx;
                    }
                }
                out[o] = best;
                winners[o] = ch * h * w + best_idx;
                o += 1;
            }
        }
    }
}

fn relu(values: &mut [f64]) {
    for v in values {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

/// Zero gradient entries where the stored ReLU activation is zero.
fn relu_mask(grad: &mut [f64], activated: &[f64]) {
    for (g, &a) in grad.iter_mut().zip(activated) {
        if a <= 0.0 {
            *g = 0.0;
        }
    }
}

struct Scratch {
    a1: Vec<f64>,
    p1: Vec<f64>,
    win1: Vec<usize>,
    a2: Vec<f64>,
    p2: Vec<f64>,
    win2: Vec<usize>,
    logits: Vec<f64>,
    dlogits: Vec<f64>,
    dp2: Vec<f64>,
    da2: Vec<f64>,
    dp1: Vec<f64>,
    da1: Vec<f64>,
}

impl Scratch {
    fn new(g: &Geometry, k: usize) -> Self {
        let full = g.c1 * g.image.height * g.image.width;
        let pooled1 = g.c1 * g.h1 * g.w1;
        let conv2 = g.c2 * g.h1 * g.w1;
        Scratch {
            a1: vec![0.0; full],
            p1: vec![0.0; pooled1],
            win1: vec![0; pooled1],
            a2: vec![0.0; conv2],
            p2: vec![0.0; g.flat],
            win2: vec![0; g.flat],
            logits: vec![0.0; k],
            dlogits: Vec::new(),
            dp2: vec![0.0; g.flat],
            da2: vec![0.0; conv2],
            dp1: vec![0.0; pooled1],
            da1: vec![0.0; full],
        }
    }
}

fn forward_example(x: &[f64], p: &Split, g: &Geometry, k: usize, s: &mut Scratch) {
    let (h, w) = (g.image.height, g.image.width);
    conv3x3(x, g.image.channels, h, w, p.w1, p.b1, g.c1, &mut s.a1);
    relu(&mut s.a1);
    maxpool2(&s.a1, g.c1, h, w, &mut s.p1, &mut s.win1);
    conv3x3(&s.p1, g.c1, g.h1, g.w1, p.w2, p.b2, g.c2, &mut s.a2);
    relu(&mut s.a2);
    maxpool2(&s.a2, g.c2, g.h1, g.w1, &mut s.p2, &mut s.win2);
    for j in 0..k {
        let mut v = p.bd[j];
        for (f, &pv) in s.p2.iter().enumerate() {
            v += pv * p.wd[f * k + j];
        }
        s.logits[j] = v;
    }
}

pub(super) fn logits_into(
    params: &[f64],
    config: &ModelConfig,
    features: &[f64],
    out: &mut Vec<f64>,
) {
    let g = geometry(config);
    let k = config.num_classes();
    let p = split(params, &g, k);
    let d = config.input_dim();
    let mut s = Scratch::new(&g, k);
    out.clear();
    for x in features.chunks_exact(d) {
        forward_example(x, &p, &g, k, &mut s);
        out.extend_from_slice(&s.logits);
    }
}

pub(super) fn backward(params: &[f64], config: &ModelConfig, batch: &Batch, grad: &mut [f64]) -> f64 {
    let g = geometry(config);
    let k = config.num_classes();
    let d = config.input_dim();
    let p = split(params, &g, k);
    let b = batch.len();

    let (dw1, rest) = grad.split_at_mut(g.c1 * g.image.channels * 9);
    let (db1, rest) = rest.split_at_mut(g.c1);
    let (dw2, rest) = rest.split_at_mut(g.c2 * g.c1 * 9);
    let (db2, rest) = rest.split_at_mut(g.c2);
    let (dwd, dbd) = rest.split_at_mut(g.flat * k);

    let mut s = Scratch::new(&g, k);
    let mut total_loss = 0.0;
    let inv_b = 1.0 / b as f64;

    for (i, x) in batch.features().chunks_exact(d).enumerate() {
        forward_example(x, &p, &g, k, &mut s);
        let label = batch.labels()[i];
        total_loss += linalg::softmax_cross_entropy(
            &s.logits,
            std::slice::from_ref(&label),
            k,
            Some(&mut s.dlogits),
        );
        for dv in s.dlogits.iter_mut() {
            *dv *= inv_b;
        }

        // dense layer
        for (f, &pv) in s.p2.iter().enumerate() {
            for (j, &dl) in s.dlogits.iter().enumerate() {
                dwd[f * k + j] += pv * dl;
            }
        }
        for (j, &dl) in s.dlogits.iter().enumerate() {
            dbd[j] += dl;
        }
        for (f, dv) in s.dp2.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (j, &dl) in s.dlogits.iter().enumerate() {
                acc += p.wd[f * k + j] * dl;
            }
            *dv = acc;
        }

        // unpool 2, ReLU mask, conv2 grads
        s.da2.fill(0.0);
        for (o, &win) in s.win2.iter().enumerate() {
            s.da2[win] += s.dp2[o];
        }
        relu_mask(&mut s.da2, &s.a2);
        conv3x3_backward(
            &s.p1,
            g.c1,
            g.h1,
            g.w1,
            p.w2,
            g.c2,
            &s.da2,
            dw2,
            db2,
            Some(&mut s.dp1),
        );

        // unpool 1, ReLU mask, conv1 grads (no input gradient needed)
        s.da1.fill(0.0);
        for (o, &win) in s.win1.iter().enumerate() {
            s.da1[win] += s.dp1[o];
        }
        relu_mask(&mut s.da1, &s.a1);
        conv3x3_backward(
            x,
            g.image.channels,
            g.image.height,
            g.image.width,
            p.w1,
            g.c1,
            &s.da1,
            dw1,
            db1,
            None,
        );
    }
    total_loss * inv_b
}
