use super::*;
use crate::error::Error;
use crate::models::{evaluate, init_params, train_local, ModelConfig};
use proptest::prelude::*;
use std::collections::HashSet;
use std::fs;

// ---------------------------------------------------------------- fixtures

/// Build an IDX image file in memory: magic, count, rows, cols, pixels.
fn idx_images(count: u32, rows: u32, cols: u32, pixels: &[u8]) -> Vec<u8> {
    let mut bytes = Vec::new();
    bytes.extend_from_slice(&0x0000_0803u32.to_be_bytes());
    bytes.extend_from_slice(&count.to_be_bytes());
    bytes.extend_from_slice(&rows.to_be_bytes());
    bytes.extend_from_slice(&cols.to_be_bytes());
    bytes.extend_from_slice(pixels);
    bytes
}

fn idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut bytes = Vec::new();
    bytes.extend_from_slice(&0x0000_0801u32.to_be_bytes());
    bytes.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    bytes.extend_from_slice(labels);
    bytes
}

/// Write a tiny MNIST-format directory: `count` images of 2x2 pixels.
fn write_mnist_fixture(dir: &std::path::Path, train: &[u8], test: &[u8]) {
    let write_split = |images: &str, labels: &str, labs: &[u8]| {
        let pixels: Vec<u8> = (0..labs.len() * 4).map(|i| (i * 37 % 256) as u8).collect();
        fs::write(dir.join(images), idx_images(labs.len() as u32, 2, 2, &pixels)).unwrap();
        fs::write(dir.join(labels), idx_labels(labs)).unwrap();
    };
    write_split("train-images-idx3-ubyte", "train-labels-idx1-ubyte", train);
    write_split("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte", test);
}

#[test]
fn mnist_fixture_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    write_mnist_fixture(dir.path(), &[0, 1, 2, 3, 4], &[5, 6]);
    let (train, test) = load_mnist(dir.path()).unwrap();
    assert_eq!(train.len(), 5);
    assert_eq!(test.len(), 2);
    assert_eq!(train.num_features(), 4);
    assert_eq!(train.num_classes(), 10);
    assert_eq!(train.labels(), &[0, 1, 2, 3, 4]);
    // pixels scaled into [0, 1]
    assert!(train.features().iter().all(|&v| (0.0..=1.0).contains(&v)));
    // byte 37*1 of the first image becomes 37/255
    assert!((train.row(0)[1] - 37.0 / 255.0).abs() < 1e-15);

    // loader round-trip: loading the same files twice is identical
    let (again, _) = load_mnist(dir.path()).unwrap();
    assert_eq!(train, again);
}

#[test]
fn mnist_rejects_bad_magic() {
    let dir = tempfile::tempdir().unwrap();
    write_mnist_fixture(dir.path(), &[1, 2], &[3]);
    let path = dir.path().join("train-images-idx3-ubyte");
    let mut bytes = fs::read(&path).unwrap();
    bytes[3] = 0x01; // images magic becomes 0x00000801
    fs::write(&path, bytes).unwrap();

    match load_mnist(dir.path()) {
        Err(Error::Format { path: p, offset, .. }) => {
            assert!(p.ends_with("train-images-idx3-ubyte"));
            assert_eq!(offset, 0);
        }
        other => panic!("expected format error, got {other:?}"),
    }
}

#[test]
fn mnist_rejects_truncation_and_count_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    write_mnist_fixture(dir.path(), &[1, 2, 3], &[4]);

    // drop the last pixel byte of the train images
    let path = dir.path().join("train-images-idx3-ubyte");
    let mut bytes = fs::read(&path).unwrap();
    bytes.pop();
    fs::write(&path, &bytes).unwrap();
    assert!(matches!(load_mnist(dir.path()), Err(Error::Format { .. })));

    // restore, then claim 4 labels while images hold 3
    write_mnist_fixture(dir.path(), &[1, 2, 3], &[4]);
    let labels_path = dir.path().join("train-labels-idx1-ubyte");
    fs::write(&labels_path, idx_labels(&[0, 1, 2, 3])).unwrap();
    match load_mnist(dir.path()) {
        Err(Error::Format { path: p, offset, .. }) => {
            assert!(p.ends_with("train-labels-idx1-ubyte"));
            assert_eq!(offset, 4);
        }
        other => panic!("expected count-mismatch format error, got {other:?}"),
    }
}

fn cifar_record(label: u8, fill: u8) -> Vec<u8> {
    let mut record = vec![label];
    record.extend(std::iter::repeat(fill).take(3072));
    record
}

#[test]
fn cifar_fixture_roundtrip_and_layout() {
    let dir = tempfile::tempdir().unwrap();
    for (i, name) in cifar::TRAIN_BATCHES.iter().enumerate() {
        let mut bytes = cifar_record(i as u8, 10 * (i as u8 + 1));
        bytes.extend(cifar_record(9 - i as u8, 7));
        fs::write(dir.path().join(name), bytes).unwrap();
    }
    fs::write(dir.path().join(cifar::TEST_BATCH), cifar_record(3, 128)).unwrap();

    let (train, test) = load_cifar10(dir.path()).unwrap();
    assert_eq!(train.len(), 10);
    assert_eq!(test.len(), 1);
    assert_eq!(train.num_features(), 3072);
    // record layout: byte 0 is the label, bytes 1.. are pixels
    assert_eq!(train.label(0), 0);
    assert_eq!(train.label(1), 9);
    assert!((train.row(0)[0] - 10.0 / 255.0).abs() < 1e-15);
    assert!((test.row(0)[3071] - 128.0 / 255.0).abs() < 1e-15);
    assert!(train.features().iter().all(|&v| (0.0..=1.0).contains(&v)));

    // per-class counts via an independent byte-level read
    let mut counts = [0usize; 10];
    for name in cifar::TRAIN_BATCHES {
        let bytes = fs::read(dir.path().join(name)).unwrap();
        for record in bytes.chunks_exact(3073) {
            counts[record[0] as usize] += 1;
        }
    }
    for class in 0..10 {
        let loaded = train.labels().iter().filter(|&&l| l == class).count();
        assert_eq!(loaded, counts[class]);
    }
}

#[test]
fn cifar_rejects_partial_records() {
    let dir = tempfile::tempdir().unwrap();
    for name in cifar::TRAIN_BATCHES {
        fs::write(dir.path().join(name), cifar_record(1, 2)).unwrap();
    }
    let mut bad = cifar_record(1, 2);
    bad.extend_from_slice(&[0, 1, 2]); // 3 stray bytes
    fs::write(dir.path().join(cifar::TEST_BATCH), bad).unwrap();

    match load_cifar10(dir.path()) {
        Err(Error::Format { path, offset, .. }) => {
            assert!(path.ends_with(cifar::TEST_BATCH));
            assert_eq!(offset, 3073);
        }
        other => panic!("expected format error, got {other:?}"),
    }
}

// ------------------------------------------------------------- synthetic

#[test]
fn synthetic_is_deterministic_and_balanced() {
    let a = generate_synthetic(101, 5, 3, 2.0, 9).unwrap();
    let b = generate_synthetic(101, 5, 3, 2.0, 9).unwrap();
    assert_eq!(a, b);
    let c = generate_synthetic(101, 5, 3, 2.0, 10).unwrap();
    assert_ne!(a, c);

    for class in 0..3 {
        let count = a.labels().iter().filter(|&&l| l == class).count();
        assert!((33..=34).contains(&count), "class {class}: {count}");
    }
}

#[test]
fn synthetic_zero_separation_is_unlearnable() {
    let train = generate_synthetic(600, 4, 3, 0.0, 11).unwrap();
    let test = generate_synthetic(300, 4, 3, 0.0, 12).unwrap();
    let config = ModelConfig::logreg(4, 3).unwrap();
    let trained = train_local(&init_params(&config, 1), &config, &train, 10, 32, 0.05, 2).unwrap();
    let eval = evaluate(&trained, &config, &test).unwrap();
    assert!(
        (eval.accuracy - 1.0 / 3.0).abs() < 0.12,
        "coincident clusters should stay near chance, got {}",
        eval.accuracy
    );
}

#[test]
fn synthetic_wide_separation_is_easily_learnable() {
    let train = generate_synthetic(600, 4, 3, 10.0, 13).unwrap();
    let test = generate_synthetic(300, 4, 3, 10.0, 14).unwrap();
    let config = ModelConfig::logreg(4, 3).unwrap();
    let trained = train_local(&init_params(&config, 1), &config, &train, 15, 32, 0.05, 2).unwrap();
    let eval = evaluate(&trained, &config, &test).unwrap();
    assert!(eval.accuracy >= 0.99, "separated clusters: {}", eval.accuracy);
}

#[test]
fn synthetic_rejects_bad_arguments() {
    assert!(generate_synthetic(3, 2, 4, 1.0, 0).is_err()); // n < k
    assert!(generate_synthetic(10, 2, 1, 1.0, 0).is_err()); // k < 2
    assert!(generate_synthetic(10, 0, 2, 1.0, 0).is_err());
    assert!(generate_synthetic(10, 2, 2, f64::NAN, 0).is_err());
}

// ------------------------------------------------------------- partitions

#[test]
fn iid_partition_small_example() {
    let data = generate_synthetic(10, 2, 2, 1.0, 21).unwrap();
    let plan = partition_iid(&data, 5, 22).unwrap();
    assert_eq!(plan.participants(), 5);
    let mut seen = HashSet::new();
    for list in plan.assignments() {
        assert_eq!(list.len(), 2);
        for &i in list {
            assert!(seen.insert(i), "index {i} assigned twice");
        }
    }
    assert_eq!(seen.len(), 10);
}

#[test]
fn iid_partition_single_participant_is_identity_set() {
    let data = generate_synthetic(17, 2, 2, 1.0, 23).unwrap();
    let plan = partition_iid(&data, 1, 24).unwrap();
    assert_eq!(plan.participants(), 1);
    let mut got = plan.participant(0).to_vec();
    got.sort_unstable();
    assert_eq!(got, (0..17).collect::<Vec<_>>());
}

#[test]
fn iid_partition_rejects_more_participants_than_rows() {
    let data = generate_synthetic(4, 2, 2, 1.0, 25).unwrap();
    assert!(partition_iid(&data, 5, 26).is_err());
    assert!(partition_iid(&data, 0, 26).is_err());
}

#[test]
fn iid_label_histograms_track_global_distribution() {
    // chi-square sanity on n = 6000, p = 10, fixed seed
    let data = generate_synthetic(6000, 3, 10, 1.0, 27).unwrap();
    let plan = partition_iid(&data, 10, 28).unwrap();
    let global = 600.0; // rows per class overall
    let mut worst = 0.0f64;
    for list in plan.assignments() {
        let mut counts = [0usize; 10];
        for &i in list {
            counts[data.label(i)] += 1;
        }
        let expected = global / 10.0; // 60 per class per participant
        let chi2: f64 = counts
            .iter()
            .map(|&c| {
                let d = c as f64 - expected;
                d * d / expected
            })
            .sum();
        worst = worst.max(chi2);
    }
    // df = 9; values this size are unremarkable, an order larger would mean
    // the shuffle is broken. Verified once against this seed and pinned.
    assert!(worst < 30.0, "worst per-participant chi-square {worst}");
}

#[test]
fn shards_partition_arithmetic_at_paper_shape() {
    // 60000 rows, 50 participants, 2 shards each: 100 shards of 600
    let features = vec![0.0; 60_000];
    let labels: Vec<usize> = (0..60_000).map(|i| i / 6000).collect();
    let data = Dataset::new(features, labels, 1, 10).unwrap();
    let plan = partition_shards(&data, 50, 2, 31).unwrap();
    assert_eq!(plan.participants(), 50);
    assert!(plan.assignments().iter().all(|l| l.len() == 1200));

    let mut seen = HashSet::new();
    for list in plan.assignments() {
        for &i in list {
            assert!(seen.insert(i));
        }
    }
    assert_eq!(seen.len(), 60_000);
}

#[test]
fn shards_concentrate_labels() {
    let data = generate_synthetic(6000, 2, 10, 1.0, 33).unwrap();
    let plan = partition_shards(&data, 50, 2, 34).unwrap();
    let mut max_distinct = 0;
    let mut sum_distinct = 0;
    for list in plan.assignments() {
        let distinct: HashSet<usize> = list.iter().map(|&i| data.label(i)).collect();
        max_distinct = max_distinct.max(distinct.len());
        sum_distinct += distinct.len();
    }
    // two shards cover at most three labels when shards may straddle a boundary
    assert!(max_distinct <= 3, "participant saw {max_distinct} labels");

    // strictly fewer distinct labels than under IID on the same data
    let iid = partition_iid(&data, 50, 34).unwrap();
    let iid_sum: usize = iid
        .assignments()
        .iter()
        .map(|list| {
            list.iter()
                .map(|&i| data.label(i))
                .collect::<HashSet<_>>()
                .len()
        })
        .sum();
    assert!(sum_distinct < iid_sum, "{sum_distinct} vs iid {iid_sum}");
}

#[test]
fn shards_drop_remainder_and_reject_zero_shard_size() {
    let data = generate_synthetic(103, 2, 2, 1.0, 35).unwrap();
    let plan = partition_shards(&data, 5, 2, 36).unwrap(); // 10 shards of 10, 3 dropped
    let total: usize = plan.assignments().iter().map(Vec::len).sum();
    assert_eq!(total, 100);
    assert!(plan.assignments().iter().all(|l| l.len() == 20));

    let tiny = generate_synthetic(5, 2, 2, 1.0, 37).unwrap();
    assert!(partition_shards(&tiny, 3, 2, 38).is_err());
}

// ----------------------------------------------------------------- subset

#[test]
fn subset_identity_and_composition() {
    let data = generate_synthetic(20, 3, 2, 1.0, 41).unwrap();
    let all: Vec<usize> = (0..20).collect();
    assert_eq!(subset(&data, &all).unwrap(), data);

    let a: Vec<usize> = vec![3, 5, 7, 11, 13];
    let b: Vec<usize> = vec![4, 0, 2];
    let ab: Vec<usize> = b.iter().map(|&j| a[j]).collect();
    let nested = subset(&subset(&data, &a).unwrap(), &b).unwrap();
    assert_eq!(nested, subset(&data, &ab).unwrap());
}

#[test]
fn subset_rejects_empty_and_out_of_range() {
    let data = generate_synthetic(5, 2, 2, 1.0, 42).unwrap();
    assert!(subset(&data, &[]).is_err());
    assert!(subset(&data, &[5]).is_err());
}

// -------------------------------------------------------------------- csv

#[test]
fn dataset_csv_export_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate_synthetic(8, 3, 2, 1.5, 43).unwrap();
    let path = dir.path().join("synthetic.csv");
    data.write_csv(&path).unwrap();

    let text = fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "label,f0,f1,f2");
    let mut rows = 0;
    for (i, line) in lines.enumerate() {
        let mut parts = line.split(',');
        let label: usize = parts.next().unwrap().parse().unwrap();
        assert_eq!(label, data.label(i));
        for (j, part) in parts.enumerate() {
            let v: f64 = part.parse().unwrap();
            assert_eq!(v, data.row(i)[j], "shortest form must round-trip");
        }
        rows += 1;
    }
    assert_eq!(rows, 8);
}

// ------------------------------------------------------------- properties

proptest! {
    #![proptest_config(ProptestConfig::with_cases(120))]

    #[test]
    fn partition_invariants(
        n in 1usize..400,
        p in 1usize..20,
        shards_per_client in 1usize..4,
        use_shards in any::<bool>(),
        seed in any::<u64>(),
    ) {
        let labels: Vec<usize> = (0..n).map(|i| (i * 7 + seed as usize) % 5).collect();
        let features = vec![0.5; n];
        let data = Dataset::new(features, labels, 1, 5).unwrap();

        let plan = if use_shards {
            match partition_shards(&data, p, shards_per_client, seed) {
                Ok(plan) => plan,
                Err(_) => {
                    prop_assert!(n / (p * shards_per_client) == 0);
                    return Ok(());
                }
            }
        } else {
            match partition_iid(&data, p, seed) {
                Ok(plan) => plan,
                Err(_) => {
                    prop_assert!(p > n);
                    return Ok(());
                }
            }
        };

        // disjointness
        let mut seen = HashSet::new();
        for list in plan.assignments() {
            for &i in list {
                prop_assert!(i < n);
                prop_assert!(seen.insert(i), "index {} assigned twice", i);
            }
        }

        if use_shards {
            // equal sizes, remainder below the shard grid
            let shard_size = n / (p * shards_per_client);
            for list in plan.assignments() {
                prop_assert_eq!(list.len(), shards_per_client * shard_size);
            }
            prop_assert!(n - seen.len() < p * shards_per_client);
        } else {
            // coverage with sizes differing by at most one
            prop_assert_eq!(seen.len(), n);
            let sizes: Vec<usize> = plan.assignments().iter().map(Vec::len).collect();
            let (min, max) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
            prop_assert!(max - min <= 1);
        }
    }
}
