//! Convergence laboratory for comparing three training paradigms — centralized,
//! distributed, and federated averaging — over shared datasets and models.
//!
//! The crate is organized around five pieces:
//!
//! - [`models`]: self-contained trainable models (softmax regression, one-hidden-layer
//!   MLP, a small CNN) with analytic gradients and mini-batch SGD.
//! - [`data`]: dataset ingestion (MNIST IDX, CIFAR-10 binary, synthetic clusters) and
//!   IID / label-shard partitioning across participants.
//! - [`trainers`]: the three paradigms, driven by a common round loop that produces
//!   per-round convergence records.
//! - [`metrics`]: convergence-curve assembly, communication accounting, CSV export.
//! - [`harness`]: scenario registry, experiment runner, and the `fedbench` CLI.
//!
//! Every operation is a pure function of its arguments including the seed: a fixed
//! `(config, seed)` pair reproduces a run bit-for-bit, with or without client-level
//! parallelism.

pub mod data;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod models;
pub(crate) mod rng;
pub mod trainers;

pub use error::{Error, Result};
