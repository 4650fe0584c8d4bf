use rand::seq::SliceRandom;

use super::Dataset;
use crate::error::{Error, Result};
use crate::rng::seeded;

/// Shuffles rows with a seeded Fisher-Yates pass and splits off the first
/// `⌈fraction · N⌉` rows as the training set.
///
/// The train size is clamped to `[1, N − 1]` so neither side is empty.
pub fn split_shuffle(ds: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Domain(format!(
            "train fraction {train_fraction} outside (0, 1)"
        )));
    }
    let n = ds.len();
    if n < 2 {
        return Err(Error::Domain(format!("cannot split {n} row(s)")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seeded(seed));
    let n_train = ((train_fraction * n as f64).ceil() as usize).clamp(1, n - 1);
    let (train, test) = order.split_at(n_train);
    Ok((ds.subset(train), ds.subset(test)))
}
