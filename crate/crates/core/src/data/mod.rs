//! Dataset ingestion, normalization, and partitioning across participants.
//!
//! Datasets are immutable after construction: row-major feature matrices with
//! class labels, all finite, labels in range. Partition plans assign training
//! rows to participants either IID (seeded permutation, near-equal chunks) or
//! by label-sorted shards, the construction that concentrates few labels per
//! participant.

mod cifar;
mod mnist;

pub use cifar::load_cifar10;
pub use mnist::load_mnist;

use crate::error::{Error, Result};
use crate::rng::{rng_from, STREAM_PARTITION, STREAM_SYNTH};
use rand::seq::SliceRandom;
use rand::Rng;
use std::io::Write;
use std::path::Path;

/// Labeled feature vectors. `n >= 1`, labels in `[0, num_classes)`, features
/// finite; all checked at construction.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    labels: Vec<usize>,
    num_features: usize,
    num_classes: usize,
}

impl Dataset {
    pub fn new(
        features: Vec<f64>,
        labels: Vec<usize>,
        num_features: usize,
        num_classes: usize,
    ) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::invalid_input("dataset must contain at least one row"));
        }
        if num_features == 0 {
            return Err(Error::invalid_input("num_features must be >= 1"));
        }
        if features.len() != labels.len() * num_features {
            return Err(Error::invalid_input(format!(
                "feature buffer holds {} values, expected {} rows x {} dims",
                features.len(),
                labels.len(),
                num_features
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(Error::invalid_input(format!(
                "label {bad} out of range for {num_classes} classes"
            )));
        }
        if !features.iter().all(|v| v.is_finite()) {
            return Err(Error::invalid_input("features must all be finite"));
        }
        Ok(Dataset {
            features,
            labels,
            num_features,
            num_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        false // n >= 1 by construction
    }

    pub fn num_features(&self) -> usize {
        self.num_features
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.num_features..(i + 1) * self.num_features]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    /// Bytes one example occupies on the wire: 8 per feature plus 8 for the
    /// label, raw float64 payload with no compression.
    pub fn bytes_per_example(&self) -> u64 {
        8 * self.num_features as u64 + 8
    }

    /// Export as CSV with header `label,f0,...,f{d-1}`. Floats are written in
    /// shortest round-trip form.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = std::io::BufWriter::new(file);
        let mut write = |line: String| -> Result<()> {
            writeln!(out, "{line}").map_err(|e| Error::io(path, e))
        };
        let header = std::iter::once("label".to_string())
            .chain((0..self.num_features).map(|j| format!("f{j}")))
            .collect::<Vec<_>>()
            .join(",");
        write(header)?;
        for i in 0..self.len() {
            let mut line = self.labels[i].to_string();
            for v in self.row(i) {
                line.push(',');
                line.push_str(&v.to_string());
            }
            write(line)?;
        }
        out.flush().map_err(|e| Error::io(path, e))
    }
}

/// Copy of the selected rows, in the order given.
pub fn subset(data: &Dataset, indices: &[usize]) -> Result<Dataset> {
    if indices.is_empty() {
        return Err(Error::invalid_input(
            "subset selection is empty; datasets must be non-empty",
        ));
    }
    let d = data.num_features();
    let mut features = Vec::with_capacity(indices.len() * d);
    let mut labels = Vec::with_capacity(indices.len());
    for &i in indices {
        if i >= data.len() {
            return Err(Error::invalid_input(format!(
                "subset index {i} out of range for dataset of {} rows",
                data.len()
            )));
        }
        features.extend_from_slice(data.row(i));
        labels.push(data.label(i));
    }
    Dataset::new(features, labels, d, data.num_classes())
}

/// How training rows are distributed across participants.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PartitionScheme {
    Iid,
    Shards,
}

impl PartitionScheme {
    pub fn name(self) -> &'static str {
        match self {
            PartitionScheme::Iid => "iid",
            PartitionScheme::Shards => "shards",
        }
    }
}

impl std::str::FromStr for PartitionScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "iid" => Ok(PartitionScheme::Iid),
            "shards" => Ok(PartitionScheme::Shards),
            other => Err(Error::invalid_config(format!(
                "unknown partition scheme '{other}' (expected iid|shards)"
            ))),
        }
    }
}

/// Assignment of training-row indices to participants. Lists are pairwise
/// disjoint and cover all rows except, under the shard scheme, a remainder of
/// fewer than `participants * shards_per_client` dropped rows.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartitionPlan {
    assignments: Vec<Vec<usize>>,
    scheme: PartitionScheme,
    shards_per_client: usize,
}

impl PartitionPlan {
    pub fn participants(&self) -> usize {
        self.assignments.len()
    }

    pub fn assignments(&self) -> &[Vec<usize>] {
        &self.assignments
    }

    pub fn participant(&self, k: usize) -> &[usize] {
        &self.assignments[k]
    }

    pub fn scheme(&self) -> PartitionScheme {
        self.scheme
    }

    /// Shards held by each participant; zero under the IID scheme.
    pub fn shards_per_client(&self) -> usize {
        self.shards_per_client
    }
}

/// Shuffle rows with a seeded permutation and split into `p` contiguous
/// chunks whose sizes differ by at most one.
pub fn partition_iid(data: &Dataset, p: usize, seed: u64) -> Result<PartitionPlan> {
    if p == 0 {
        return Err(Error::invalid_input("participant count must be >= 1"));
    }
    if p > data.len() {
        return Err(Error::invalid_input(format!(
            "cannot split {} rows across {p} participants",
            data.len()
        )));
    }
    let n = data.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_from(&[seed, STREAM_PARTITION]));

    let base = n / p;
    let extra = n % p;
    let mut assignments = Vec::with_capacity(p);
    let mut start = 0;
    for k in 0..p {
        let size = base + usize::from(k < extra);
        assignments.push(order[start..start + size].to_vec());
        start += size;
    }
    Ok(PartitionPlan {
        assignments,
        scheme: PartitionScheme::Iid,
        shards_per_client: 0,
    })
}

/// Sort rows by label, cut them into `p * shards_per_client` equal shards,
/// and deal `shards_per_client` shards to each participant by a seeded draw
/// without replacement. Every participant receives the same amount of data;
/// rows beyond the largest multiple of the shard grid are dropped.
pub fn partition_shards(
    data: &Dataset,
    p: usize,
    shards_per_client: usize,
    seed: u64,
) -> Result<PartitionPlan> {
    if p == 0 || shards_per_client == 0 {
        return Err(Error::invalid_input(
            "participants and shards_per_client must be >= 1",
        ));
    }
    let n = data.len();
    let shard_count = p * shards_per_client;
    let shard_size = n / shard_count;
    if shard_size == 0 {
        return Err(Error::invalid_input(format!(
            "{n} rows cannot fill {shard_count} shards (shard size would be zero)"
        )));
    }

    let mut by_label: Vec<usize> = (0..n).collect();
    by_label.sort_by_key(|&i| data.label(i)); // stable: preserves row order within a label

    let mut shard_ids: Vec<usize> = (0..shard_count).collect();
    shard_ids.shuffle(&mut rng_from(&[seed, STREAM_PARTITION]));

    let assignments = shard_ids
        .chunks_exact(shards_per_client)
        .map(|shards| {
            let mut rows = Vec::with_capacity(shards_per_client * shard_size);
            for &s in shards {
                rows.extend_from_slice(&by_label[s * shard_size..(s + 1) * shard_size]);
            }
            rows
        })
        .collect();
    Ok(PartitionPlan {
        assignments,
        scheme: PartitionScheme::Shards,
        shards_per_client,
    })
}

/// Sample one standard normal value (Box-Muller, cosine branch only).
fn standard_normal(rng: &mut impl Rng) -> f64 {
    let u1: f64 = 1.0 - rng.random::<f64>(); // (0, 1]
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Unit direction for cluster `j`: signed standard-basis vectors for the
/// first `2d` clusters, then seeded-but-fixed random directions. The layout
/// depends only on `(d, k)`, never on the caller's seed, so datasets drawn
/// with different seeds share the same cluster structure.
fn cluster_direction(j: usize, d: usize) -> Vec<f64> {
    let mut dir = vec![0.0; d];
    if j < d {
        dir[j] = 1.0;
    } else if j < 2 * d {
        dir[j - d] = -1.0;
    } else {
        let mut rng = rng_from(&[STREAM_SYNTH, 0xd1ec, j as u64]);
        let mut norm = 0.0;
        for v in dir.iter_mut() {
            *v = standard_normal(&mut rng);
            norm += *v * *v;
        }
        let inv = 1.0 / norm.sqrt();
        for v in dir.iter_mut() {
            *v *= inv;
        }
    }
    dir
}

/// `k` unit-variance Gaussian clusters whose mean distance is controlled by
/// `separation`; labels balanced to within one (`label = i mod k`).
pub fn generate_synthetic(n: usize, d: usize, k: usize, separation: f64, seed: u64) -> Result<Dataset> {
    if k < 2 {
        return Err(Error::invalid_input("synthetic data needs k >= 2 classes"));
    }
    if n < k {
        return Err(Error::invalid_input("synthetic data needs n >= k rows"));
    }
    if d == 0 {
        return Err(Error::invalid_input("synthetic data needs d >= 1"));
    }
    if !separation.is_finite() || separation < 0.0 {
        return Err(Error::invalid_input("separation must be finite and >= 0"));
    }

    let means: Vec<Vec<f64>> = (0..k)
        .map(|j| {
            cluster_direction(j, d)
                .into_iter()
                .map(|v| v * separation)
                .collect()
        })
        .collect();

    let mut rng = rng_from(&[seed, STREAM_SYNTH]);
    let mut features = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let label = i % k;
        labels.push(label);
        for &m in &means[label] {
            features.push(m + standard_normal(&mut rng));
        }
    }
    Dataset::new(features, labels, d, k)
}

#[cfg(test)]
mod tests;
