//! The `fedbench` command line: `run` executes a scenario or a custom
//! experiment, `compare` runs all three paradigms side by side.
//!
//! Flags may also be supplied through `--config FILE`, a flat `key=value`
//! file whose keys mirror the long flag names; explicit flags win.

use super::{
    default_budget_bytes, default_model, parse_config_file, run_experiment, scenario,
    DatasetSpec, ExperimentConfig, ExperimentSummary, Scale, DATA_DIR_ENV, DEFAULT_BATCH_SIZE,
    DEFAULT_LR, DEFAULT_SEED, DEFAULT_SHARDS_PER_CLIENT,
};
use crate::data::PartitionScheme;
use crate::error::{Error, Result};
use crate::models::ModelKind;
use crate::trainers::{Paradigm, TrainerConfig};
use clap::{Args, CommandFactory, Parser, Subcommand};
use std::ffi::OsString;
use std::path::PathBuf;

#[derive(Parser, Debug)]
#[command(
    name = "fedbench",
    about = "Convergence comparison of centralized, distributed, and federated training",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one scenario (or a custom experiment) for a single paradigm.
    Run(RunArgs),
    /// Run all three paradigms on the same setup and print a summary table.
    Compare(CommonArgs),
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Training paradigm: centralized | distributed | federated.
    #[arg(long)]
    paradigm: Option<String>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args, Debug, Default)]
struct CommonArgs {
    /// Benchmark scenario 1, 2, or 3; omit for a custom run.
    #[arg(long)]
    scenario: Option<u8>,
    /// Dataset: mnist | cifar10 | synthetic (default synthetic).
    #[arg(long)]
    dataset: Option<String>,
    /// Number of participants p.
    #[arg(long)]
    participants: Option<usize>,
    /// Participation ratio C in (0, 1].
    #[arg(long)]
    ratio: Option<f64>,
    /// Communication rounds R.
    #[arg(long)]
    rounds: Option<usize>,
    /// Local epochs E per round.
    #[arg(long = "local-epochs")]
    local_epochs: Option<usize>,
    /// Mini-batch size.
    #[arg(long = "batch-size")]
    batch_size: Option<usize>,
    /// SGD learning rate.
    #[arg(long)]
    lr: Option<f64>,
    /// Model: logreg | mlp | cnn-small.
    #[arg(long)]
    model: Option<String>,
    /// Partition scheme: iid | shards.
    #[arg(long)]
    partition: Option<String>,
    /// Shards per client under the shards scheme.
    #[arg(long = "shards-per-client")]
    shards_per_client: Option<usize>,
    /// Scale: paper | desk (default desk).
    #[arg(long)]
    scale: Option<String>,
    /// Run seed; one seed per invocation.
    #[arg(long)]
    seed: Option<u64>,
    /// Centralized upload budget in bytes per participant per round.
    #[arg(long = "budget-bytes")]
    budget_bytes: Option<u64>,
    /// Directory holding mnist/ and cifar-10-batches-bin/ (default
    /// $FEDBENCH_DATA_DIR, then ./data).
    #[arg(long = "data-dir")]
    data_dir: Option<PathBuf>,
    /// Output directory for curve CSVs (default ./results).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Flat key=value config file; explicit flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Train sampled clients on the rayon pool (identical results, less
    /// wall time).
    #[arg(long, default_value_t = false)]
    parallel: bool,
}

impl CommonArgs {
    /// Fill unset fields from a `key=value` config file.
    fn apply_file(&mut self, paradigm: &mut Option<String>) -> Result<()> {
        let Some(path) = self.config.clone() else {
            return Ok(());
        };
        for (key, value) in parse_config_file(&path)? {
            match key.as_str() {
                "paradigm" => set_if_unset_str(paradigm, &value),
                "scenario" => set_if_unset(&mut self.scenario, &key, &value)?,
                "dataset" => set_if_unset_str(&mut self.dataset, &value),
                "participants" => set_if_unset(&mut self.participants, &key, &value)?,
                "ratio" => set_if_unset(&mut self.ratio, &key, &value)?,
                "rounds" => set_if_unset(&mut self.rounds, &key, &value)?,
                "local-epochs" => set_if_unset(&mut self.local_epochs, &key, &value)?,
                "batch-size" => set_if_unset(&mut self.batch_size, &key, &value)?,
                "lr" => set_if_unset(&mut self.lr, &key, &value)?,
                "model" => set_if_unset_str(&mut self.model, &value),
                "partition" => set_if_unset_str(&mut self.partition, &value),
                "shards-per-client" => set_if_unset(&mut self.shards_per_client, &key, &value)?,
                "scale" => set_if_unset_str(&mut self.scale, &value),
                "seed" => set_if_unset(&mut self.seed, &key, &value)?,
                "budget-bytes" => set_if_unset(&mut self.budget_bytes, &key, &value)?,
                "data-dir" => {
                    if self.data_dir.is_none() {
                        self.data_dir = Some(PathBuf::from(&value));
                    }
                }
                "out" => {
                    if self.out.is_none() {
                        self.out = Some(PathBuf::from(&value));
                    }
                }
                "parallel" => {
                    if !self.parallel {
                        self.parallel = value.parse().map_err(|_| {
                            Error::invalid_config(format!("parallel must be true|false, got '{value}'"))
                        })?;
                    }
                }
                other => {
                    return Err(Error::invalid_config(format!(
                        "unknown config key '{other}' in {}",
                        path.display()
                    )))
                }
            }
        }
        Ok(())
    }

    /// Build the experiment list this invocation describes.
    fn build_configs(&self, paradigm: Paradigm) -> Result<Vec<ExperimentConfig>> {
        let dataset: DatasetSpec = self
            .dataset
            .as_deref()
            .unwrap_or("synthetic")
            .parse()?;
        let scale: Scale = self.scale.as_deref().unwrap_or("desk").parse()?;
        let model_kind: Option<ModelKind> =
            self.model.as_deref().map(str::parse).transpose()?;
        let partition_scheme: Option<PartitionScheme> =
            self.partition.as_deref().map(str::parse).transpose()?;

        let mut configs = match self.scenario {
            Some(id) => scenario(id, dataset, paradigm, scale)?,
            None => vec![custom_config(dataset, paradigm, scale)?],
        };
        for config in &mut configs {
            if let Some(kind) = model_kind {
                config.model = default_model(dataset, scale, Some(kind))?;
            }
            if let Some(scheme) = partition_scheme {
                config.partition_scheme = scheme;
            }
            let t = &mut config.trainer;
            apply(&mut t.participants, self.participants);
            apply(&mut t.participation_ratio, self.ratio);
            apply(&mut t.rounds, self.rounds);
            apply(&mut t.local_epochs, self.local_epochs);
            apply(&mut t.batch_size, self.batch_size);
            apply(&mut t.lr, self.lr);
            apply(&mut t.seed, self.seed);
            apply(&mut t.upload_budget_bytes, self.budget_bytes);
            t.parallel_clients = self.parallel;
            apply(&mut config.shards_per_client, self.shards_per_client);
            if let Some(dir) = &self.data_dir {
                config.data_dir = dir.clone();
            }
            if let Some(out) = &self.out {
                config.out_dir = out.clone();
            }
            // participant overrides invalidate scenario-3 labels
            if self.participants.is_some() && config.label.starts_with("s3-p") {
                config.label = format!("s3-p{}", config.trainer.participants);
            }
            config.validate()?;
        }
        Ok(configs)
    }
}

fn apply<T: Copy>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn set_if_unset_str(slot: &mut Option<String>, value: &str) {
    if slot.is_none() {
        *slot = Some(value.to_string());
    }
}

fn set_if_unset<T: std::str::FromStr>(slot: &mut Option<T>, key: &str, value: &str) -> Result<()> {
    if slot.is_none() {
        let parsed = value
            .parse()
            .map_err(|_| Error::invalid_config(format!("cannot parse {key}='{value}'")))?;
        *slot = Some(parsed);
    }
    Ok(())
}

/// Defaults for runs outside the scenario registry.
fn custom_config(dataset: DatasetSpec, paradigm: Paradigm, scale: Scale) -> Result<ExperimentConfig> {
    Ok(ExperimentConfig {
        label: "custom".to_string(),
        dataset,
        model: default_model(dataset, scale, None)?,
        trainer: TrainerConfig {
            paradigm,
            participants: 10,
            participation_ratio: 0.2,
            rounds: 10,
            local_epochs: 5,
            batch_size: DEFAULT_BATCH_SIZE,
            lr: DEFAULT_LR,
            seed: DEFAULT_SEED,
            upload_budget_bytes: default_budget_bytes(dataset, scale),
            parallel_clients: false,
        },
        partition_scheme: PartitionScheme::Iid,
        shards_per_client: DEFAULT_SHARDS_PER_CLIENT,
        scale,
        data_dir: std::env::var_os(DATA_DIR_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("data")),
        out_dir: PathBuf::from("results"),
    })
}

fn summary_header() -> String {
    format!(
        "{:<28} {:>12} {:>6} {:>14} {:>14} {:>14}",
        "run", "final_acc", "best@", "best_acc", "bytes_up", "bytes_down"
    )
}

fn summary_row(s: &ExperimentSummary) -> String {
    format!(
        "{:<28} {:>12.4} {:>6} {:>14.4} {:>14} {:>14}",
        s.run_id,
        s.final_accuracy,
        s.best_round,
        s.best_accuracy,
        s.total_bytes_up,
        s.total_bytes_down
    )
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(mut args) => {
            args.common.apply_file(&mut args.paradigm)?;
            let paradigm: Paradigm = args
                .paradigm
                .as_deref()
                .ok_or_else(|| Error::invalid_config("run requires --paradigm"))?
                .parse()?;
            let configs = args.common.build_configs(paradigm)?;
            println!("{}", summary_header());
            for config in &configs {
                let output = run_experiment(config)?;
                println!("{}", summary_row(&output.summary));
            }
            Ok(())
        }
        Command::Compare(mut common) => {
            let mut ignored = None;
            common.apply_file(&mut ignored)?;
            println!("{}", summary_header());
            for paradigm in [Paradigm::Centralized, Paradigm::Distributed, Paradigm::Federated] {
                let configs = common.build_configs(paradigm)?;
                for config in &configs {
                    let output = run_experiment(config)?;
                    println!("{}", summary_row(&output.summary));
                }
            }
            Ok(())
        }
    }
}

/// Parse and execute; returns the process exit code (0 success, 1 config
/// error, 2 I/O or data error).
pub fn cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let parsed = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(parsed) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                Error::Io { .. } | Error::Format { .. } => 2,
                _ => {
                    eprintln!("{}", Cli::command().render_usage());
                    1
                }
            }
        }
    }
}
