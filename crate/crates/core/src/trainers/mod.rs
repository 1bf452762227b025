//! The three training paradigms, driven by a common round loop.
//!
//! All three start from the same seeded global model and share the SGD core:
//!
//! - **federated**: each round samples `ceil(C * p)` participants; each
//!   trains `E` local epochs from the received global model; the server
//!   aggregates by example-count-weighted averaging. Bytes move both ways for
//!   every selected participant.
//! - **distributed**: the same loop with every participant active every
//!   round. By construction it produces bitwise the same curve as federated
//!   with `C = 1`.
//! - **centralized**: participants upload raw examples instead of models,
//!   capped by a per-participant per-round byte budget; the server's pool
//!   grows cumulatively and is trained `E` epochs per round. No download
//!   traffic is counted.
//!
//! Within a round, per-client local training may run in parallel
//! ([`TrainerConfig::parallel_clients`]); aggregation always consumes results
//! in ascending client index, so curves are identical either way.

use crate::data::{subset, Dataset, PartitionPlan};
use crate::error::{Error, Result};
use crate::models::{
    self, evaluate, init_params, train_local, Batch, ModelConfig, ParameterVector,
};
use crate::rng::{mix, rng_from, STREAM_EVAL, STREAM_LOCAL, STREAM_SAMPLE};
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use std::time::Instant;

/// Training paradigm selector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Paradigm {
    Centralized,
    Distributed,
    Federated,
}

impl Paradigm {
    pub fn name(self) -> &'static str {
        match self {
            Paradigm::Centralized => "centralized",
            Paradigm::Distributed => "distributed",
            Paradigm::Federated => "federated",
        }
    }
}

impl std::str::FromStr for Paradigm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "centralized" => Ok(Paradigm::Centralized),
            "distributed" => Ok(Paradigm::Distributed),
            "federated" => Ok(Paradigm::Federated),
            other => Err(Error::invalid_config(format!(
                "unknown paradigm '{other}' (expected centralized|distributed|federated)"
            ))),
        }
    }
}

/// Run parameters shared by all paradigms.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainerConfig {
    pub paradigm: Paradigm,
    /// Number of participants `p`.
    pub participants: usize,
    /// Participation ratio `C` in (0, 1]; `ceil(C * p)` clients per round.
    pub participation_ratio: f64,
    /// Communication rounds `R`.
    pub rounds: usize,
    /// Local epochs `E` per activation (server epochs for centralized).
    pub local_epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
    /// Per-participant per-round upload cap in bytes; centralized only.
    pub upload_budget_bytes: u64,
    /// Execute per-client local training on the rayon pool. Curves are
    /// identical with or without this; it only changes wall time.
    pub parallel_clients: bool,
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.participants == 0 {
            return Err(Error::invalid_config("participants must be >= 1"));
        }
        if self.rounds == 0 {
            return Err(Error::invalid_config("rounds must be >= 1"));
        }
        if self.local_epochs == 0 {
            return Err(Error::invalid_config("local_epochs must be >= 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid_config("batch_size must be >= 1"));
        }
        if !(self.participation_ratio > 0.0 && self.participation_ratio <= 1.0) {
            return Err(Error::invalid_config(format!(
                "participation_ratio must be in (0, 1], got {}",
                self.participation_ratio
            )));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::invalid_config(format!(
                "lr must be positive and finite, got {}",
                self.lr
            )));
        }
        Ok(())
    }
}

/// One completed communication round.
#[derive(Clone, Debug, PartialEq)]
pub struct RoundResult {
    /// 1-based round number, strictly increasing within a run.
    pub round: usize,
    /// The global model after this round's aggregation.
    pub global_params: ParameterVector,
    /// Mean loss on a fixed seeded train subsample (see [`evaluate_round`]).
    pub train_loss: f64,
    /// Accuracy on the test set, in [0, 1].
    pub test_accuracy: f64,
    pub bytes_up: u64,
    pub bytes_down: u64,
    /// Participants active this round, ascending.
    pub active_clients: Vec<usize>,
    /// Wall-clock time of the round; excluded from determinism guarantees.
    pub wall_ms: u64,
}

/// Number of clients selected per round: `ceil(C * p)`, at least 1.
///
/// The product is computed with a tiny downward guard so ratios like 0.2,
/// which are not exactly representable, do not push `C * p` just above an
/// integer (0.2 * 50 must select 10, not 11).
pub fn selected_count(p: usize, ratio: f64) -> usize {
    let m = (ratio * p as f64 - 1e-9).ceil() as usize;
    m.clamp(1, p)
}

/// Draw `ceil(C * p)` distinct client indices uniformly without replacement,
/// keyed by `(seed, round)`; returned sorted ascending.
pub fn sample_clients(p: usize, ratio: f64, seed: u64, round: usize) -> Vec<usize> {
    let m = selected_count(p, ratio);
    let mut rng = rng_from(&[seed, STREAM_SAMPLE, round as u64]);
    let mut pool: Vec<usize> = (0..p).collect();
    for i in 0..m {
        let j = rng.random_range(i..p);
        pool.swap(i, j);
    }
    let mut selected = pool[..m].to_vec();
    selected.sort_unstable();
    selected
}

/// Example-count-weighted mean of parameter vectors, summed in input order.
/// Callers pass updates in ascending client index for bit-reproducibility.
pub fn weighted_average(updates: &[(ParameterVector, u64)]) -> Result<ParameterVector> {
    let (first, first_n) = updates
        .first()
        .ok_or_else(|| Error::invalid_input("weighted_average needs at least one update"))?;
    if updates.len() == 1 {
        if *first_n == 0 {
            return Err(Error::invalid_input("update weight must be >= 1 example"));
        }
        return Ok(first.clone()); // a single update passes through unchanged
    }
    let len = first.len();
    let mut acc = vec![0.0; len];
    let mut total: u64 = 0;
    for (params, n) in updates {
        if params.len() != len {
            return Err(Error::invalid_input(format!(
                "parameter layout mismatch: {} vs {len} entries",
                params.len()
            )));
        }
        if *n == 0 {
            return Err(Error::invalid_input("update weight must be >= 1 example"));
        }
        let w = *n as f64;
        for (a, &v) in acc.iter_mut().zip(params.values()) {
            *a += w * v;
        }
        total += n;
    }
    let inv = 1.0 / total as f64;
    for a in acc.iter_mut() {
        *a *= inv;
    }
    Ok(ParameterVector::from_values(acc))
}

/// Train loss on a fixed seeded 1000-example train subsample (full train if
/// smaller) and accuracy on the test set. The subsample is keyed by a fixed
/// stream, not the run seed, so every run evaluates on the same rows.
pub fn evaluate_round(
    global_params: &ParameterVector,
    model_config: &ModelConfig,
    full_train: &Dataset,
    test: &Dataset,
) -> Result<(f64, f64)> {
    const EVAL_ROWS: usize = 1000;

    let n = full_train.len();
    let batch = if n <= EVAL_ROWS {
        Batch::from_dataset(full_train, &(0..n).collect::<Vec<_>>())?
    } else {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng_from(&[STREAM_EVAL, n as u64]));
        order.truncate(EVAL_ROWS);
        order.sort_unstable();
        Batch::from_dataset(full_train, &order)?
    };
    let train_loss = models::loss(global_params, model_config, &batch)?;
    let test_accuracy = evaluate(global_params, model_config, test)?.accuracy;
    Ok((train_loss, test_accuracy))
}

fn check_run_inputs(
    config: &TrainerConfig,
    expect: Paradigm,
    model_config: &ModelConfig,
    partition: &PartitionPlan,
) -> Result<()> {
    config.validate()?;
    if config.paradigm != expect {
        return Err(Error::invalid_config(format!(
            "config paradigm is {} but the {} runner was invoked",
            config.paradigm.name(),
            expect.name()
        )));
    }
    if partition.participants() != config.participants {
        return Err(Error::invalid_config(format!(
            "partition has {} lists but config names {} participants",
            partition.participants(),
            config.participants
        )));
    }
    let _ = model_config.param_count(); // layout is derivable from config alone
    Ok(())
}

/// Materialized per-participant datasets, in participant order.
fn client_datasets(partition: &PartitionPlan, full_train: &Dataset) -> Result<Vec<Dataset>> {
    partition
        .assignments()
        .iter()
        .map(|rows| subset(full_train, rows))
        .collect()
}

/// Local training results for the selected clients, ascending client index.
fn train_selected(
    config: &TrainerConfig,
    model_config: &ModelConfig,
    clients: &[Dataset],
    global: &ParameterVector,
    selected: &[usize],
    round: usize,
) -> Result<Vec<(ParameterVector, u64)>> {
    let train_one = |&k: &usize| -> Result<(ParameterVector, u64)> {
        let data = &clients[k];
        let local_seed = mix(&[config.seed, STREAM_LOCAL, round as u64, k as u64]);
        let params = train_local(
            global,
            model_config,
            data,
            config.local_epochs,
            config.batch_size,
            config.lr,
            local_seed,
        )?;
        Ok((params, data.len() as u64))
    };
    if config.parallel_clients {
        selected.par_iter().map(train_one).collect()
    } else {
        selected.iter().map(train_one).collect()
    }
}

enum Selection {
    All,
    Sampled(f64),
}

fn run_rounds(
    config: &TrainerConfig,
    model_config: &ModelConfig,
    partition: &PartitionPlan,
    full_train: &Dataset,
    test: &Dataset,
    selection: Selection,
) -> Result<Vec<RoundResult>> {
    let clients = client_datasets(partition, full_train)?;
    let param_bytes = 8 * model_config.param_count() as u64;
    let mut global = init_params(model_config, config.seed);
    let mut results = Vec::with_capacity(config.rounds);

    for round in 1..=config.rounds {
        let started = Instant::now();
        let selected = match selection {
            Selection::All => (0..config.participants).collect::<Vec<_>>(),
            Selection::Sampled(ratio) => {
                sample_clients(config.participants, ratio, config.seed, round)
            }
        };
        let updates = train_selected(config, model_config, &clients, &global, &selected, round)?;
        global = weighted_average(&updates)?;
        let (train_loss, test_accuracy) = evaluate_round(&global, model_config, full_train, test)?;
        let transferred = selected.len() as u64 * param_bytes;
        results.push(RoundResult {
            round,
            global_params: global.clone(),
            train_loss,
            test_accuracy,
            bytes_up: transferred,
            bytes_down: transferred,
            active_clients: selected,
            wall_ms: started.elapsed().as_millis() as u64,
        });
    }
    Ok(results)
}

/// Federated averaging: sampled participation, local epochs, weighted
/// aggregation, repeated for the configured number of rounds.
pub fn run_federated(
    config: &TrainerConfig,
    model_config: &ModelConfig,
    train_partition: &PartitionPlan,
    full_train: &Dataset,
    test: &Dataset,
) -> Result<Vec<RoundResult>> {
    check_run_inputs(config, Paradigm::Federated, model_config, train_partition)?;
    run_rounds(
        config,
        model_config,
        train_partition,
        full_train,
        test,
        Selection::Sampled(config.participation_ratio),
    )
}

/// Synchronous distributed training: every participant is active every
/// round; otherwise identical to the federated loop.
pub fn run_distributed(
    config: &TrainerConfig,
    model_config: &ModelConfig,
    train_partition: &PartitionPlan,
    full_train: &Dataset,
    test: &Dataset,
) -> Result<Vec<RoundResult>> {
    check_run_inputs(config, Paradigm::Distributed, model_config, train_partition)?;
    run_rounds(
        config,
        model_config,
        train_partition,
        full_train,
        test,
        Selection::All,
    )
}

/// Centralized training under an upload budget: each round every participant
/// uploads its next `floor(budget / bytes_per_example)` not-yet-uploaded
/// examples (in partition order); the server trains `E` epochs on the
/// cumulative pool.
pub fn run_centralized(
    config: &TrainerConfig,
    model_config: &ModelConfig,
    train_partition: &PartitionPlan,
    full_train: &Dataset,
    test: &Dataset,
) -> Result<Vec<RoundResult>> {
    check_run_inputs(config, Paradigm::Centralized, model_config, train_partition)?;
    let bytes_per_example = full_train.bytes_per_example();
    if config.upload_budget_bytes < bytes_per_example {
        return Err(Error::invalid_config(format!(
            "upload budget of {} bytes is below one example ({bytes_per_example} bytes)",
            config.upload_budget_bytes
        )));
    }
    let quota = (config.upload_budget_bytes / bytes_per_example) as usize;

    let mut cursors = vec![0usize; config.participants];
    let mut pool: Vec<usize> = Vec::with_capacity(full_train.len());
    let mut global = init_params(model_config, config.seed);
    let mut results = Vec::with_capacity(config.rounds);

    for round in 1..=config.rounds {
        let started = Instant::now();
        let mut active = Vec::new();
        let mut uploaded = 0u64;
        for (k, assignment) in train_partition.assignments().iter().enumerate() {
            let remaining = assignment.len() - cursors[k];
            let take = quota.min(remaining);
            if take > 0 {
                pool.extend_from_slice(&assignment[cursors[k]..cursors[k] + take]);
                cursors[k] += take;
                uploaded += take as u64;
                active.push(k);
            }
        }
        let pool_data = subset(full_train, &pool)?;
        let local_seed = mix(&[config.seed, STREAM_LOCAL, round as u64, 0]);
        global = train_local(
            &global,
            model_config,
            &pool_data,
            config.local_epochs,
            config.batch_size,
            config.lr,
            local_seed,
        )?;
        let (train_loss, test_accuracy) = evaluate_round(&global, model_config, full_train, test)?;
        results.push(RoundResult {
            round,
            global_params: global.clone(),
            train_loss,
            test_accuracy,
            bytes_up: uploaded * bytes_per_example,
            bytes_down: 0,
            active_clients: active,
            wall_ms: started.elapsed().as_millis() as u64,
        });
    }
    Ok(results)
}
