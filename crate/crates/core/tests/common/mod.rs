//! Shared helpers for the integration suites.

use fedbench::data::Dataset;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::path::PathBuf;

/// Number of pattern modes per class in the stand-in dataset.
const MODES: usize = 12;
const STANDIN_DIM: usize = 784;
const STANDIN_CLASSES: usize = 10;
/// Pixel noise level; templates must be averaged over many examples.
const NOISE: f64 = 0.55;
/// Fixed stream for the class templates so any seed shares the structure.
const TEMPLATE_SEED: u64 = 0x7e6d_9a1f_0c3b_5511;

/// Where MNIST is looked for: $FEDBENCH_DATA_DIR or ./data, plus `mnist/`.
pub fn mnist_dir() -> PathBuf {
    std::env::var_os("FEDBENCH_DATA_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("data"))
        .join("mnist")
}

pub fn mnist_available() -> bool {
    mnist_dir().join("train-images-idx3-ubyte").exists()
}

fn sample_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Deterministic MNIST-shaped stand-in: 28x28 grayscale-like rows in [0, 1],
/// ten classes, each a mixture of sparse pattern templates under heavy pixel
/// noise. Multi-modal classes and noise make accuracy grow with training-set
/// size, which is the property the trend criteria exercise.
pub fn standin_mnist(n: usize, seed: u64) -> Dataset {
    let mut template_rng = ChaCha8Rng::seed_from_u64(TEMPLATE_SEED);
    let mut templates = vec![vec![0.0f64; STANDIN_DIM]; STANDIN_CLASSES * MODES];
    for template in templates.iter_mut() {
        for v in template.iter_mut() {
            if template_rng.random::<f64>() < 0.10 {
                *v = 0.35 + 0.25 * template_rng.random::<f64>();
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut features = Vec::with_capacity(n * STANDIN_DIM);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let label = i % STANDIN_CLASSES;
        let mode = rng.random_range(0..MODES);
        let template = &templates[label * MODES + mode];
        for &t in template {
            let v: f64 = t + NOISE * sample_normal(&mut rng);
            features.push(v.clamp(0.0, 1.0));
        }
        labels.push(label);
    }
    Dataset::new(features, labels, STANDIN_DIM, STANDIN_CLASSES).unwrap()
}
