//! MNIST IDX loader.
//!
//! IDX layout, all integers big-endian: images carry magic `0x00000803`,
//! then item count, rows, cols as u32, then raw pixel bytes; labels carry
//! magic `0x00000801`, then item count, then raw label bytes.

use super::Dataset;
use crate::error::{Error, Result};
use std::path::Path;

const IMAGE_MAGIC: u32 = 0x0000_0803;
const LABEL_MAGIC: u32 = 0x0000_0801;

pub(super) const TRAIN_IMAGES: &str = "train-images-idx3-ubyte";
pub(super) const TRAIN_LABELS: &str = "train-labels-idx1-ubyte";
pub(super) const TEST_IMAGES: &str = "t10k-images-idx3-ubyte";
pub(super) const TEST_LABELS: &str = "t10k-labels-idx1-ubyte";

/// Load the four stock IDX files from `dir` and scale pixels to `[0, 1]`.
pub fn load_mnist(dir: &Path) -> Result<(Dataset, Dataset)> {
    let train = load_split(&dir.join(TRAIN_IMAGES), &dir.join(TRAIN_LABELS))?;
    let test = load_split(&dir.join(TEST_IMAGES), &dir.join(TEST_LABELS))?;
    Ok((train, test))
}

fn load_split(images_path: &Path, labels_path: &Path) -> Result<Dataset> {
    let (pixels, count, rows, cols) = read_idx_images(images_path)?;
    let labels = read_idx_labels(labels_path)?;
    if labels.len() != count {
        return Err(Error::format(
            labels_path,
            4,
            format!(
                "label count {} does not match image count {count}",
                labels.len()
            ),
        ));
    }
    if let Some(pos) = labels.iter().position(|&l| l > 9) {
        return Err(Error::format(
            labels_path,
            8 + pos as u64,
            format!("label byte {} exceeds 9", labels[pos]),
        ));
    }
    let features = pixels.iter().map(|&b| f64::from(b) / 255.0).collect();
    let labels = labels.into_iter().map(usize::from).collect();
    Dataset::new(features, labels, rows * cols, 10)
}

fn read_u32_be(bytes: &[u8], offset: usize, path: &Path) -> Result<u32> {
    let end = offset + 4;
    if bytes.len() < end {
        return Err(Error::format(
            path,
            bytes.len() as u64,
            "file truncated inside header",
        ));
    }
    Ok(u32::from_be_bytes(bytes[offset..end].try_into().unwrap()))
}

fn read_idx_images(path: &Path) -> Result<(Vec<u8>, usize, usize, usize)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let magic = read_u32_be(&bytes, 0, path)?;
    if magic != IMAGE_MAGIC {
        return Err(Error::format(
            path,
            0,
            format!("bad magic {magic:#010x}, expected {IMAGE_MAGIC:#010x}"),
        ));
    }
    let count = read_u32_be(&bytes, 4, path)? as usize;
    let rows = read_u32_be(&bytes, 8, path)? as usize;
    let cols = read_u32_be(&bytes, 12, path)? as usize;
    let expected = 16 + count * rows * cols;
    if bytes.len() != expected {
        return Err(Error::format(
            path,
            bytes.len().min(expected) as u64,
            format!("file holds {} bytes, header implies {expected}", bytes.len()),
        ));
    }
    Ok((bytes[16..].to_vec(), count, rows, cols))
}

fn read_idx_labels(path: &Path) -> Result<Vec<u8>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let magic = read_u32_be(&bytes, 0, path)?;
    if magic != LABEL_MAGIC {
        return Err(Error::format(
            path,
            0,
            format!("bad magic {magic:#010x}, expected {LABEL_MAGIC:#010x}"),
        ));
    }
    let count = read_u32_be(&bytes, 4, path)? as usize;
    let expected = 8 + count;
    if bytes.len() != expected {
        return Err(Error::format(
            path,
            bytes.len().min(expected) as u64,
            format!("file holds {} bytes, header implies {expected}", bytes.len()),
        ));
    }
    Ok(bytes[8..].to_vec())
}
