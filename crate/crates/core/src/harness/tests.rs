use super::cli::cli;
use super::*;
use crate::trainers::Paradigm;

/// Drop the wall_ms column so deterministic content can be compared.
fn csv_without_wall(text: &str) -> String {
    text.lines()
        .map(|l| l.rsplit_once(',').unwrap().0)
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn scenario_one_matches_quoted_parameters() {
    let configs = scenario(1, DatasetSpec::Mnist, Paradigm::Federated, Scale::Paper).unwrap();
    assert_eq!(configs.len(), 1);
    let c = &configs[0];
    assert_eq!(c.label, "s1");
    assert_eq!(c.trainer.participants, 50);
    assert_eq!(c.trainer.participation_ratio, 0.2);
    assert_eq!(c.trainer.rounds, 100);
    assert_eq!(c.trainer.local_epochs, 10);
}

#[test]
fn scenario_two_runs_two_hundred_rounds() {
    let paper = scenario(2, DatasetSpec::Mnist, Paradigm::Distributed, Scale::Paper).unwrap();
    assert_eq!(paper[0].trainer.rounds, 200);
    assert_eq!(paper[0].trainer.local_epochs, 10);

    let desk = scenario(2, DatasetSpec::Mnist, Paradigm::Distributed, Scale::Desk).unwrap();
    assert_eq!(desk[0].trainer.rounds, 100); // halved
}

#[test]
fn scenario_three_sweeps_participants_ascending() {
    let configs = scenario(3, DatasetSpec::Cifar10, Paradigm::Federated, Scale::Paper).unwrap();
    let ps: Vec<usize> = configs.iter().map(|c| c.trainer.participants).collect();
    assert_eq!(ps, vec![20, 40, 60, 80, 100]);
    for c in &configs {
        assert_eq!(c.trainer.participation_ratio, 0.2);
        assert_eq!(c.trainer.rounds, 100);
        assert!(c.label.starts_with("s3-p"));
    }
}

#[test]
fn scenario_rejects_unknown_ids() {
    assert!(scenario(0, DatasetSpec::Mnist, Paradigm::Federated, Scale::Desk).is_err());
    assert!(scenario(4, DatasetSpec::Mnist, Paradigm::Federated, Scale::Desk).is_err());
}

#[test]
fn centralized_scenarios_use_one_server_epoch() {
    let configs = scenario(1, DatasetSpec::Mnist, Paradigm::Centralized, Scale::Desk).unwrap();
    assert_eq!(configs[0].trainer.local_epochs, 1);
    assert!(configs[0].trainer.upload_budget_bytes >= 6280);
}

#[test]
fn desk_scale_halves_rounds_and_budget_follows_dataset() {
    let desk = scenario(1, DatasetSpec::Mnist, Paradigm::Federated, Scale::Desk).unwrap();
    assert_eq!(desk[0].trainer.rounds, 50);
    assert_eq!(default_budget_bytes(DatasetSpec::Mnist, Scale::Desk), 6280);
    assert_eq!(default_budget_bytes(DatasetSpec::Mnist, Scale::Paper), 25 * 6280);
    assert_eq!(default_budget_bytes(DatasetSpec::Synthetic, Scale::Desk), 8 * 64 + 8);
}

fn smoke_config(out: &std::path::Path, paradigm: Paradigm) -> ExperimentConfig {
    let mut configs = scenario(1, DatasetSpec::Synthetic, paradigm, Scale::Desk).unwrap();
    let mut c = configs.remove(0);
    c.label = "custom".into();
    c.trainer.participants = 5;
    c.trainer.rounds = 3;
    c.trainer.local_epochs = 1;
    c.trainer.participation_ratio = 0.4;
    c.out_dir = out.to_path_buf();
    c
}

#[test]
fn run_experiment_smoke_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let config = smoke_config(dir.path(), Paradigm::Federated);
    let output = run_experiment(&config).unwrap();

    assert_eq!(output.summary.rounds, 3);
    assert_eq!(output.curve.records().len(), 3);
    assert!(output.summary.csv_path.exists());
    let text = std::fs::read_to_string(&output.summary.csv_path).unwrap();
    assert_eq!(text.lines().count(), 4); // header + 3 records
    assert!(output.summary.run_id.contains("synthetic"));
    assert!(output.summary.run_id.contains("federated"));
    assert!(output.summary.run_id.contains("seed42"));
}

#[test]
fn run_experiment_is_deterministic_modulo_wall_time() {
    let dir = tempfile::tempdir().unwrap();
    let config = smoke_config(dir.path(), Paradigm::Federated);
    let first = run_experiment(&config).unwrap();
    let a = std::fs::read_to_string(&first.summary.csv_path).unwrap();

    let dir2 = tempfile::tempdir().unwrap();
    let mut config2 = config.clone();
    config2.out_dir = dir2.path().to_path_buf();
    let second = run_experiment(&config2).unwrap();
    let b = std::fs::read_to_string(&second.summary.csv_path).unwrap();

    assert_eq!(csv_without_wall(&a), csv_without_wall(&b));
}

#[test]
fn experiment_rejects_inconsistent_model_and_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = smoke_config(dir.path(), Paradigm::Federated);
    config.model = crate::models::ModelConfig::logreg(99, 10).unwrap();
    assert!(run_experiment(&config).is_err());
}

#[test]
fn parse_config_file_accepts_comments_and_blanks() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("exp.conf");
    std::fs::write(&path, "# comment\n\nrounds = 4\ndataset=synthetic\n").unwrap();
    let pairs = parse_config_file(&path).unwrap();
    assert_eq!(
        pairs,
        vec![
            ("rounds".to_string(), "4".to_string()),
            ("dataset".to_string(), "synthetic".to_string())
        ]
    );

    std::fs::write(&path, "just-some-text\n").unwrap();
    assert!(parse_config_file(&path).is_err());
}

fn run_cli(args: &[&str]) -> i32 {
    cli(std::iter::once("fedbench").chain(args.iter().copied()))
}

#[test]
fn cli_run_executes_and_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("results");
    let code = run_cli(&[
        "run",
        "--paradigm",
        "federated",
        "--dataset",
        "synthetic",
        "--participants",
        "4",
        "--rounds",
        "2",
        "--local-epochs",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let csv = out.join("custom_synthetic_federated_seed42.csv");
    assert!(csv.exists(), "expected {csv:?}");
}

#[test]
fn cli_rejects_unknown_paradigm_with_exit_one() {
    assert_eq!(run_cli(&["run", "--paradigm", "quantum"]), 1);
    assert_eq!(run_cli(&["run"]), 1); // paradigm is required
    assert_eq!(run_cli(&["run", "--paradigm", "federated", "--scenario", "9"]), 1);
}

#[test]
fn cli_missing_data_files_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let code = run_cli(&[
        "run",
        "--paradigm",
        "federated",
        "--dataset",
        "mnist",
        "--rounds",
        "1",
        "--data-dir",
        dir.path().join("nope").to_str().unwrap(),
        "--out",
        dir.path().join("results").to_str().unwrap(),
    ]);
    assert_eq!(code, 2);
}

#[test]
fn cli_compare_runs_all_three_paradigms() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("results");
    let code = run_cli(&[
        "compare",
        "--dataset",
        "synthetic",
        "--participants",
        "4",
        "--rounds",
        "2",
        "--local-epochs",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    for paradigm in ["centralized", "distributed", "federated"] {
        assert!(out.join(format!("custom_synthetic_{paradigm}_seed42.csv")).exists());
    }
}

#[test]
fn cli_config_file_fills_gaps_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("results");
    let conf = dir.path().join("exp.conf");
    std::fs::write(
        &conf,
        format!(
            "paradigm=federated\ndataset=synthetic\nparticipants=4\nrounds=3\nlocal-epochs=1\nout={}\n",
            out.display()
        ),
    )
    .unwrap();

    // file alone: 3 rounds
    assert_eq!(run_cli(&["run", "--config", conf.to_str().unwrap()]), 0);
    let csv = out.join("custom_synthetic_federated_seed42.csv");
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 4);

    // flag overrides the file's rounds
    assert_eq!(
        run_cli(&["run", "--config", conf.to_str().unwrap(), "--rounds", "1"]),
        0
    );
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 2);

    // unknown keys are config errors
    std::fs::write(&conf, "turbo=yes\n").unwrap();
    assert_eq!(run_cli(&["run", "--config", conf.to_str().unwrap()]), 1);
}
