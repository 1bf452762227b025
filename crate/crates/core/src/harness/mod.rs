//! Scenario registry, experiment runner, and configuration plumbing.
//!
//! Scenarios 1-3 reproduce the benchmark's three comparisons: fixed
//! participants over 100 rounds, the same over 200 rounds, and a sweep over
//! participant counts. Each is available at two scales:
//!
//! - `paper`: the quoted parameters on the full datasets.
//! - `desk`: a seeded 6000-example train / 1000-example test subsample with
//!   half the rounds, sized so the full suite runs on a workstation.

pub mod cli;

use crate::data::{
    generate_synthetic, load_cifar10, load_mnist, partition_iid, partition_shards, subset,
    Dataset, PartitionScheme,
};
use crate::error::{Error, Result};
use crate::metrics::{best_accuracy, cumulative_bytes, export_csv, ConvergenceCurve};
use crate::models::{ModelConfig, ModelKind};
use crate::rng::{mix, rng_from, STREAM_SUBSAMPLE};
use crate::trainers::{
    run_centralized, run_distributed, run_federated, Paradigm, TrainerConfig,
};
use rand::seq::SliceRandom;
use std::path::{Path, PathBuf};

/// Environment variable consulted for the default data directory.
pub const DATA_DIR_ENV: &str = "FEDBENCH_DATA_DIR";

pub const DESK_TRAIN_ROWS: usize = 6000;
pub const DESK_TEST_ROWS: usize = 1000;

/// Default hyperparameters, pinned so experiments are reproducible.
pub const DEFAULT_LR: f64 = 0.05;
pub const DEFAULT_BATCH_SIZE: usize = 32;
pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_SHARDS_PER_CLIENT: usize = 2;

/// Centralized upload budget defaults, in examples per participant per
/// round. At paper scale 25 examples/round completes a 1200-example upload
/// mid-run (round 48 of 100). At desk scale each participant only holds 120
/// examples, so the budget drops to the minimum of one example per round to
/// keep the server data-starved for the whole run, which is the bandwidth
/// bottleneck the centralized paradigm models.
pub const PAPER_BUDGET_EXAMPLES: u64 = 25;
pub const DESK_BUDGET_EXAMPLES: u64 = 1;

const SYNTH_DIM: usize = 64;
const SYNTH_CLASSES: usize = 10;
const SYNTH_SEPARATION: f64 = 2.0;
const SYNTH_PAPER_TRAIN: usize = 60_000;
const SYNTH_PAPER_TEST: usize = 10_000;

/// Which dataset an experiment trains on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DatasetSpec {
    Mnist,
    Cifar10,
    Synthetic,
}

impl DatasetSpec {
    pub fn name(self) -> &'static str {
        match self {
            DatasetSpec::Mnist => "mnist",
            DatasetSpec::Cifar10 => "cifar10",
            DatasetSpec::Synthetic => "synthetic",
        }
    }

    pub fn input_dim(self) -> usize {
        match self {
            DatasetSpec::Mnist => 784,
            DatasetSpec::Cifar10 => 3072,
            DatasetSpec::Synthetic => SYNTH_DIM,
        }
    }

    pub fn num_classes(self) -> usize {
        10
    }
}

impl std::str::FromStr for DatasetSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mnist" => Ok(DatasetSpec::Mnist),
            "cifar10" => Ok(DatasetSpec::Cifar10),
            "synthetic" => Ok(DatasetSpec::Synthetic),
            other => Err(Error::invalid_config(format!(
                "unknown dataset '{other}' (expected mnist|cifar10|synthetic)"
            ))),
        }
    }
}

/// Paper-scale or desk-scale execution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scale {
    Paper,
    Desk,
}

impl Scale {
    pub fn name(self) -> &'static str {
        match self {
            Scale::Paper => "paper",
            Scale::Desk => "desk",
        }
    }
}

impl std::str::FromStr for Scale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(Scale::Paper),
            "desk" => Ok(Scale::Desk),
            other => Err(Error::invalid_config(format!(
                "unknown scale '{other}' (expected paper|desk)"
            ))),
        }
    }
}

/// Everything needed to execute one experiment deterministically.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    /// Scenario tag used in file names: `s1`, `s2`, `s3-p40`, or `custom`.
    pub label: String,
    pub dataset: DatasetSpec,
    pub model: ModelConfig,
    pub trainer: TrainerConfig,
    pub partition_scheme: PartitionScheme,
    pub shards_per_client: usize,
    pub scale: Scale,
    pub data_dir: PathBuf,
    pub out_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.trainer.validate()?;
        if self.model.input_dim() != self.dataset.input_dim() {
            return Err(Error::invalid_config(format!(
                "model input_dim {} does not match dataset {} ({} features)",
                self.model.input_dim(),
                self.dataset.name(),
                self.dataset.input_dim()
            )));
        }
        if self.partition_scheme == PartitionScheme::Shards && self.shards_per_client == 0 {
            return Err(Error::invalid_config("shards_per_client must be >= 1"));
        }
        Ok(())
    }

    pub fn run_id(&self) -> String {
        format!(
            "{}_{}_{}_seed{}",
            self.label,
            self.dataset.name(),
            self.trainer.paradigm.name(),
            self.trainer.seed
        )
    }

    pub fn csv_path(&self) -> PathBuf {
        self.out_dir.join(format!("{}.csv", self.run_id()))
    }

    fn config_echo(&self) -> String {
        let t = &self.trainer;
        format!(
            "dataset={} model={} paradigm={} p={} C={} R={} E={} batch={} lr={} seed={} \
             partition={} shards_per_client={} scale={} budget_bytes={}",
            self.dataset.name(),
            describe_model(&self.model),
            t.paradigm.name(),
            t.participants,
            t.participation_ratio,
            t.rounds,
            t.local_epochs,
            t.batch_size,
            t.lr,
            t.seed,
            self.partition_scheme.name(),
            self.shards_per_client,
            self.scale.name(),
            t.upload_budget_bytes,
        )
    }
}

fn describe_model(model: &ModelConfig) -> String {
    match model.kind() {
        ModelKind::Logreg => format!("logreg({}-{})", model.input_dim(), model.num_classes()),
        ModelKind::Mlp => format!(
            "mlp({}-{}-{})",
            model.input_dim(),
            model.hidden_dim(),
            model.num_classes()
        ),
        ModelKind::CnnSmall => format!(
            "cnn-small({},c{})",
            model.input_dim(),
            model.conv_channels()
        ),
    }
}

/// Default model for a dataset at a scale: an MLP with 64 hidden units at
/// desk scale, the small CNN at paper scale.
pub fn default_model(dataset: DatasetSpec, scale: Scale, kind: Option<ModelKind>) -> Result<ModelConfig> {
    let input_dim = dataset.input_dim();
    let classes = dataset.num_classes();
    let kind = kind.unwrap_or(match scale {
        Scale::Desk => ModelKind::Mlp,
        Scale::Paper => ModelKind::CnnSmall,
    });
    match kind {
        ModelKind::Logreg => ModelConfig::logreg(input_dim, classes),
        ModelKind::Mlp => ModelConfig::mlp(input_dim, 64, classes),
        ModelKind::CnnSmall => ModelConfig::cnn_small(input_dim, 8, classes),
    }
}

/// Default centralized upload budget in bytes for a dataset at a scale.
pub fn default_budget_bytes(dataset: DatasetSpec, scale: Scale) -> u64 {
    let per_example = 8 * dataset.input_dim() as u64 + 8;
    let examples = match scale {
        Scale::Paper => PAPER_BUDGET_EXAMPLES,
        Scale::Desk => DESK_BUDGET_EXAMPLES,
    };
    examples * per_example
}

fn default_data_dir() -> PathBuf {
    std::env::var_os(DATA_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("data"))
}

/// Instantiate one of the three benchmark scenarios.
///
/// - scenario 1: p = 50, C = 0.2, R = 100
/// - scenario 2: p = 50, C = 0.2, R = 200
/// - scenario 3: p in {20, 40, 60, 80, 100}, C = 0.2, R = 100
///
/// Local epochs are 10 for distributed and federated runs; the centralized
/// server performs one pass over its pool per round. Desk scale halves R and
/// subsamples the datasets.
pub fn scenario(
    id: u8,
    dataset: DatasetSpec,
    paradigm: Paradigm,
    scale: Scale,
) -> Result<Vec<ExperimentConfig>> {
    let (participant_counts, rounds): (Vec<usize>, usize) = match id {
        1 => (vec![50], 100),
        2 => (vec![50], 200),
        3 => (vec![20, 40, 60, 80, 100], 100),
        other => {
            return Err(Error::invalid_input(format!(
                "unknown scenario {other} (expected 1, 2, or 3)"
            )))
        }
    };
    let rounds = match scale {
        Scale::Paper => rounds,
        Scale::Desk => rounds / 2,
    };
    let local_epochs = match paradigm {
        Paradigm::Centralized => 1,
        Paradigm::Distributed | Paradigm::Federated => 10,
    };

    participant_counts
        .into_iter()
        .map(|p| {
            let label = if id == 3 {
                format!("s3-p{p}")
            } else {
                format!("s{id}")
            };
            Ok(ExperimentConfig {
                label,
                dataset,
                model: default_model(dataset, scale, None)?,
                trainer: TrainerConfig {
                    paradigm,
                    participants: p,
                    participation_ratio: 0.2,
                    rounds,
                    local_epochs,
                    batch_size: DEFAULT_BATCH_SIZE,
                    lr: DEFAULT_LR,
                    seed: DEFAULT_SEED,
                    upload_budget_bytes: default_budget_bytes(dataset, scale),
                    parallel_clients: false,
                },
                partition_scheme: PartitionScheme::Iid,
                shards_per_client: DEFAULT_SHARDS_PER_CLIENT,
                scale,
                data_dir: default_data_dir(),
                out_dir: PathBuf::from("results"),
            })
        })
        .collect()
}

/// Deterministic subsample of `target` rows (identity when small enough),
/// keyed by `(seed, stream_tag)`; selected rows keep their original order.
fn desk_subsample(data: &Dataset, target: usize, seed: u64, stream_tag: u64) -> Result<Dataset> {
    if data.len() <= target {
        return Ok(data.clone());
    }
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut rng_from(&[seed, STREAM_SUBSAMPLE, stream_tag]));
    order.truncate(target);
    order.sort_unstable();
    subset(data, &order)
}

/// Load (or generate) the configured dataset pair, desk-subsampled when the
/// config says so.
pub fn load_datasets(config: &ExperimentConfig) -> Result<(Dataset, Dataset)> {
    let seed = config.trainer.seed;
    let (train, test) = match config.dataset {
        DatasetSpec::Mnist => load_mnist(&config.data_dir.join("mnist"))?,
        DatasetSpec::Cifar10 => load_cifar10(&config.data_dir.join("cifar-10-batches-bin"))?,
        DatasetSpec::Synthetic => {
            let (n_train, n_test) = match config.scale {
                Scale::Paper => (SYNTH_PAPER_TRAIN, SYNTH_PAPER_TEST),
                Scale::Desk => (DESK_TRAIN_ROWS, DESK_TEST_ROWS),
            };
            let train = generate_synthetic(
                n_train,
                SYNTH_DIM,
                SYNTH_CLASSES,
                SYNTH_SEPARATION,
                mix(&[seed, 0x7261]),
            )?;
            let test = generate_synthetic(
                n_test,
                SYNTH_DIM,
                SYNTH_CLASSES,
                SYNTH_SEPARATION,
                mix(&[seed, 0x7465]),
            )?;
            return Ok((train, test));
        }
    };
    match config.scale {
        Scale::Paper => Ok((train, test)),
        Scale::Desk => Ok((
            desk_subsample(&train, DESK_TRAIN_ROWS, seed, 0)?,
            desk_subsample(&test, DESK_TEST_ROWS, seed, 1)?,
        )),
    }
}

/// Summary of a completed experiment, as printed by the CLI.
#[derive(Clone, Debug)]
pub struct ExperimentSummary {
    pub run_id: String,
    pub label: String,
    pub paradigm: Paradigm,
    pub csv_path: PathBuf,
    pub rounds: usize,
    pub final_accuracy: f64,
    pub final_train_loss: f64,
    pub best_round: usize,
    pub best_accuracy: f64,
    pub total_bytes_up: u64,
    pub total_bytes_down: u64,
}

/// A completed experiment: the summary plus the full curve.
#[derive(Clone, Debug)]
pub struct ExperimentOutput {
    pub summary: ExperimentSummary,
    pub curve: ConvergenceCurve,
}

/// Load data, partition, dispatch to the configured trainer, and write the
/// curve CSV. Fully deterministic for a fixed config (wall times aside).
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    config.validate()?;
    let (train, test) = load_datasets(config)?;
    run_experiment_on(config, &train, &test)
}

/// [`run_experiment`] with the datasets supplied by the caller; used by the
/// acceptance suite to substitute stand-in data when the real files are
/// absent.
pub fn run_experiment_on(
    config: &ExperimentConfig,
    train: &Dataset,
    test: &Dataset,
) -> Result<ExperimentOutput> {
    config.validate()?;
    let trainer = &config.trainer;
    let partition = match config.partition_scheme {
        PartitionScheme::Iid => partition_iid(train, trainer.participants, trainer.seed)?,
        PartitionScheme::Shards => partition_shards(
            train,
            trainer.participants,
            config.shards_per_client,
            trainer.seed,
        )?,
    };
    let rounds = match trainer.paradigm {
        Paradigm::Centralized => run_centralized(trainer, &config.model, &partition, train, test)?,
        Paradigm::Distributed => run_distributed(trainer, &config.model, &partition, train, test)?,
        Paradigm::Federated => run_federated(trainer, &config.model, &partition, train, test)?,
    };
    let curve = ConvergenceCurve::from_rounds(config.run_id(), config.config_echo(), &rounds)?;

    std::fs::create_dir_all(&config.out_dir)
        .map_err(|e| Error::io(config.out_dir.clone(), e))?;
    let csv_path = config.csv_path();
    export_csv(&curve, &csv_path)?;

    let last = curve.final_record();
    let (best_round, best_acc) = best_accuracy(&curve);
    let (up, down) = cumulative_bytes(&curve);
    Ok(ExperimentOutput {
        summary: ExperimentSummary {
            run_id: config.run_id(),
            label: config.label.clone(),
            paradigm: trainer.paradigm,
            csv_path,
            rounds: curve.records().len(),
            final_accuracy: last.test_accuracy,
            final_train_loss: last.train_loss,
            best_round,
            best_accuracy: best_acc,
            total_bytes_up: up,
            total_bytes_down: down,
        },
        curve,
    })
}

/// Parse a flat `key=value` config file (blank lines and `#` comments
/// allowed) into ordered pairs.
pub fn parse_config_file(path: &Path) -> Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut pairs = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::invalid_config(format!(
                "{}:{}: expected key=value, got '{line}'",
                path.display(),
                lineno + 1
            ))
        })?;
        pairs.push((key.trim().to_string(), value.trim().to_string()));
    }
    Ok(pairs)
}

#[cfg(test)]
mod tests;
