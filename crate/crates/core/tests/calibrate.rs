//! Scratch calibration probes; run explicitly with
//! `cargo test --test calibrate -- --ignored --nocapture`.

mod common;

use fedbench::harness::{scenario, run_experiment_on, DatasetSpec, Scale};
use fedbench::trainers::Paradigm;
use std::time::Instant;

fn run_one(
    id: u8,
    paradigm: Paradigm,
    seed: u64,
    rounds_override: Option<usize>,
    out: &std::path::Path,
) -> Vec<(usize, f64)> {
    let train = common::standin_mnist(6000, seed.wrapping_mul(3).wrapping_add(1));
    let test = common::standin_mnist(1000, seed.wrapping_mul(3).wrapping_add(2));
    let mut configs = scenario(id, DatasetSpec::Mnist, paradigm, Scale::Desk).unwrap();
    let mut all = Vec::new();
    for config in configs.iter_mut() {
        config.trainer.seed = seed;
        config.trainer.parallel_clients = true;
        if let Some(r) = rounds_override {
            config.trainer.rounds = r;
        }
        config.out_dir = out.to_path_buf();
        let output = run_experiment_on(config, &train, &test).unwrap();
        all.push((config.trainer.participants, output.summary.final_accuracy));
    }
    all
}

#[test]
#[ignore]
fn probe_trajectory() {
    let out = tempfile::tempdir().unwrap();
    let train = common::standin_mnist(6000, 42 * 3 + 1);
    let test = common::standin_mnist(1000, 42 * 3 + 2);
    for paradigm in [Paradigm::Federated, Paradigm::Centralized] {
        let mut configs = scenario(1, DatasetSpec::Mnist, paradigm, Scale::Desk).unwrap();
        let config = &mut configs[0];
        config.trainer.parallel_clients = true;
        config.out_dir = out.path().to_path_buf();
        let t0 = Instant::now();
        let output = run_experiment_on(config, &train, &test).unwrap();
        let marks: Vec<(usize, f64)> = output
            .curve
            .records()
            .iter()
            .filter(|r| r.round % 10 == 0 || r.round == 1)
            .map(|r| (r.round, r.test_accuracy))
            .collect();
        println!("{:<12} {:?} ({:?})", paradigm.name(), marks, t0.elapsed());
    }
}

#[test]
#[ignore]
fn probe_speed() {
    let out = tempfile::tempdir().unwrap();
    let t0 = Instant::now();
    let acc = run_one(1, Paradigm::Federated, 42, Some(5), out.path());
    println!("federated 5 rounds: {:?} acc {:?}", t0.elapsed(), acc);

    let t0 = Instant::now();
    let acc = run_one(1, Paradigm::Distributed, 42, Some(2), out.path());
    println!("distributed 2 rounds: {:?} acc {:?}", t0.elapsed(), acc);

    let t0 = Instant::now();
    let acc = run_one(1, Paradigm::Centralized, 42, Some(10), out.path());
    println!("centralized 10 rounds: {:?} acc {:?}", t0.elapsed(), acc);
}

#[test]
#[ignore]
fn calibrate_trend() {
    let out = tempfile::tempdir().unwrap();
    for seed in [1u64, 2, 3, 5, 7, 11, 13, 17] {
        let train = common::standin_mnist(6000, seed.wrapping_mul(3).wrapping_add(1));
        let test = common::standin_mnist(1000, seed.wrapping_mul(3).wrapping_add(2));
        for paradigm in [Paradigm::Federated, Paradigm::Distributed, Paradigm::Centralized] {
            let t0 = Instant::now();
            // scenario 2 desk = 100 rounds; rounds 50 and 100 give s1/s2 finals
            let mut configs = scenario(2, DatasetSpec::Mnist, paradigm, Scale::Desk).unwrap();
            let config = &mut configs[0];
            config.trainer.seed = seed;
            config.trainer.parallel_clients = true;
            config.out_dir = out.path().to_path_buf();
            let output = run_experiment_on(config, &train, &test).unwrap();
            let at50 = output.curve.records()[49].test_accuracy;
            let at100 = output.curve.records()[99].test_accuracy;
            println!(
                "seed {seed} {:<12} s1(prefix@50) {at50:.4}  s2(final@100) {at100:.4}  ({:?})",
                paradigm.name(),
                t0.elapsed()
            );
        }
        let t0 = Instant::now();
        let sweep = run_one(3, Paradigm::Federated, seed, None, out.path());
        println!("seed {seed} s3 federated sweep {sweep:?} ({:?})", t0.elapsed());
        println!("----");
    }
}
