use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{Dataset, TargetData};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::seeded;

/// Linear regression data: standard normal features, a target that is a
/// seeded linear combination of the first `informative` features plus
/// Gaussian noise. Coefficients are uniform on `[-1, 1]`.
pub fn make_synthetic_regression(
    n: usize,
    p: usize,
    informative: usize,
    noise_std: f64,
    seed: u64,
) -> Result<Dataset> {
    if informative > p {
        return Err(Error::Domain(format!(
            "{informative} informative features requested out of {p}"
        )));
    }
    if noise_std.is_nan() || noise_std < 0.0 {
        return Err(Error::Domain("noise_std must be non-negative".into()));
    }
    let mut rng = seeded(seed);
    let coef: Vec<f64> = (0..informative)
        .map(|_| rng.random_range(-1.0..=1.0))
        .collect();
    let data: Vec<f64> = (0..n * p).map(|_| rng.sample(StandardNormal)).collect();
    let features = Matrix::from_vec(n, p, data)?;
    let targets = features
        .row_iter()
        .map(|row| {
            let signal: f64 = row.iter().zip(&coef).map(|(x, c)| x * c).sum();
            let noise: f64 = if noise_std > 0.0 {
                noise_std * rng.sample::<f64, _>(StandardNormal)
            } else {
                0.0
            };
            signal + noise
        })
        .collect();
    Dataset::new(features, TargetData::Values(targets))
}

/// Balanced Gaussian blobs (unit variance), one per class.
///
/// Centers sit at `separation/√2` along distinct axes when `p ≥ C` and along
/// a line at spacing `separation` otherwise, so every pair of centers is at
/// least `separation` apart.
pub fn make_synthetic_classification(
    n: usize,
    classes: usize,
    p: usize,
    separation: f64,
    seed: u64,
) -> Result<Dataset> {
    if classes < 2 {
        return Err(Error::Domain(format!(
            "need at least 2 classes, got {classes}"
        )));
    }
    if p == 0 {
        return Err(Error::Domain("need at least one feature".into()));
    }
    let centers: Vec<Vec<f64>> = (0..classes)
        .map(|c| {
            let mut center = vec![0.0; p];
            if p >= classes {
                center[c] = separation / std::f64::consts::SQRT_2;
            } else {
                center[0] = c as f64 * separation;
            }
            center
        })
        .collect();
    let mut rng = seeded(seed);
    let mut labels: Vec<usize> = (0..n).map(|i| i % classes).collect();
    labels.shuffle(&mut rng);
    let mut data = Vec::with_capacity(n * p);
    for &l in &labels {
        for &c in &centers[l] {
            data.push(c + rng.sample::<f64, _>(StandardNormal));
        }
    }
    Dataset::new(
        Matrix::from_vec(n, p, data)?,
        TargetData::Labels { labels, classes },
    )
}
