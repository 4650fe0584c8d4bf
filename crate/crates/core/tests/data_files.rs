use std::path::PathBuf;

use disturb_core::data::{load_csv, load_idx, split_shuffle, TargetData, Task};
use disturb_core::Error;

fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

#[test]
fn boston_csv_shape() {
    let load = load_csv(data_dir().join("boston.csv"), "MEDV", Task::Regression).unwrap();
    let ds = load.dataset;
    assert_eq!(load.dropped_rows, 0);
    assert_eq!(ds.len(), 506);
    assert_eq!(ds.n_features(), 13);
    let names = ds.feature_names.as_ref().unwrap();
    assert_eq!(names[0], "CRIM");
    assert_eq!(names[12], "LSTAT");
    assert!(!names.iter().any(|n| n == "MEDV"));
    let TargetData::Values(y) = &ds.targets else {
        panic!("regression targets expected")
    };
    assert_eq!(y[0], 24.0);
    assert!(y.iter().all(|&v| (5.0..=50.0).contains(&v)));
}

#[test]
fn boston_split_and_scaling() {
    let ds = load_csv(data_dir().join("boston.csv"), "MEDV", Task::Regression)
        .unwrap()
        .dataset;
    let (mut train, mut test) = split_shuffle(&ds, 0.5, 7).unwrap();
    assert_eq!(train.len(), 253);
    assert_eq!(test.len(), 253);
    train.scale_with(&mut test).unwrap();
    assert!(train
        .features
        .as_slice()
        .iter()
        .all(|v| (0.0..=1.0).contains(v)));
    let TargetData::Values(y) = &train.targets else {
        unreachable!()
    };
    assert_eq!(y.iter().cloned().fold(f64::INFINITY, f64::min), 0.0);
    assert_eq!(y.iter().cloned().fold(f64::NEG_INFINITY, f64::max), 1.0);
    // Test rows use the training statistics, so they may leave [0, 1].
    assert_eq!(test.feature_scaler, train.feature_scaler);
}

#[test]
fn missing_target_column() {
    let err = load_csv(data_dir().join("boston.csv"), "PRICE", Task::Regression).unwrap_err();
    assert!(matches!(err, Error::MissingColumn(_)), "{err}");
}

#[test]
fn mnist_subset_shape() {
    let dir = data_dir().join("mnist-subset");
    let ds = load_idx(
        dir.join("images-idx3-ubyte.gz"),
        dir.join("labels-idx1-ubyte.gz"),
    )
    .unwrap();
    assert_eq!(ds.len(), 5000);
    assert_eq!(ds.n_features(), 784);
    assert_eq!(ds.task(), Task::Classification);
    assert_eq!(ds.classes(), Some(10));
    let TargetData::Labels { labels, .. } = &ds.targets else {
        panic!("labels expected")
    };
    let mut counts = [0usize; 10];
    for &l in labels {
        counts[l] += 1;
    }
    assert_eq!(counts, [500; 10]);
    let pixels = ds.features.as_slice();
    assert!(pixels.iter().all(|p| (0.0..=1.0).contains(p)));
    assert!(pixels.contains(&1.0));
}

#[test]
fn swapped_idx_files_are_rejected() {
    let dir = data_dir().join("mnist-subset");
    let err = load_idx(
        dir.join("labels-idx1-ubyte.gz"),
        dir.join("images-idx3-ubyte.gz"),
    )
    .unwrap_err();
    assert!(matches!(err, Error::BadMagic { .. }), "{err}");
}
