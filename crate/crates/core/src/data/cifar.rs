//! CIFAR-10 binary loader.
//!
//! Each record is 3073 bytes: one label byte in `[0, 9]`, then 3072 pixel
//! bytes as channel-major R, G, B planes of 1024 bytes each.

use super::Dataset;
use crate::error::{Error, Result};
use std::path::Path;

const RECORD_BYTES: usize = 3073;
const PIXELS: usize = 3072;

pub(super) const TRAIN_BATCHES: [&str; 5] = [
    "data_batch_1.bin",
    "data_batch_2.bin",
    "data_batch_3.bin",
    "data_batch_4.bin",
    "data_batch_5.bin",
];
pub(super) const TEST_BATCH: &str = "test_batch.bin";

/// Load the five training batches and the test batch from `dir`, scaling
/// pixels to `[0, 1]`.
pub fn load_cifar10(dir: &Path) -> Result<(Dataset, Dataset)> {
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for name in TRAIN_BATCHES {
        read_batch(&dir.join(name), &mut features, &mut labels)?;
    }
    let train = Dataset::new(features, labels, PIXELS, 10)?;

    let mut features = Vec::new();
    let mut labels = Vec::new();
    read_batch(&dir.join(TEST_BATCH), &mut features, &mut labels)?;
    let test = Dataset::new(features, labels, PIXELS, 10)?;
    Ok((train, test))
}

fn read_batch(path: &Path, features: &mut Vec<f64>, labels: &mut Vec<usize>) -> Result<()> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() % RECORD_BYTES != 0 {
        return Err(Error::format(
            path,
            (bytes.len() - bytes.len() % RECORD_BYTES) as u64,
            format!(
                "file holds {} bytes, not a multiple of the {RECORD_BYTES}-byte record",
                bytes.len()
            ),
        ));
    }
    features.reserve(bytes.len() / RECORD_BYTES * PIXELS);
    for (i, record) in bytes.chunks_exact(RECORD_BYTES).enumerate() {
        let label = record[0];
        if label > 9 {
            return Err(Error::format(
                path,
                (i * RECORD_BYTES) as u64,
                format!("label byte {label} exceeds 9"),
            ));
        }
        labels.push(usize::from(label));
        features.extend(record[1..].iter().map(|&b| f64::from(b) / 255.0));
    }
    Ok(())
}
