//! Loss-layer regularizers that perturb a batch's training targets.
//!
//! * DisturbLabel (DL): a random `α%` of the batch labels are resampled from a
//!   multinoulli that keeps the true class with probability
//!   `p_c = 1 − (C−1)α/(100C)` and moves to each other class with
//!   `p_i = α/(100C)`.
//! * Directional DisturbLabel (DDL): as DL, but only samples whose prediction
//!   is confident (`y·ŷ/‖ŷ‖ ≥ cos θ`, 0.5 by default) are candidates.
//! * DisturbValue (DV): a random `α%` of the (MinMax-scaled) regression
//!   targets get additive Gaussian or Laplacian noise of scale `σ`.
//! * DisturbError (DE): every target whose current residual `|y − ŷ|` is
//!   below `ρ` gets additive Gaussian noise of scale `σ`.
//!
//! Every function is pure: inputs are borrowed, a new batch is returned, and
//! all randomness comes from the supplied RNG. With nothing to disturb no
//! random numbers are drawn.

use rand::seq::index;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::LossKind;
use crate::rng::SeededRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    None,
    DisturbLabel,
    DirectionalDisturbLabel,
    DisturbValue,
    DisturbError,
    /// DV and DE applied to the same batch.
    DisturbValueError,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::None => "none",
            Method::DisturbLabel => "disturb_label",
            Method::DirectionalDisturbLabel => "directional_disturb_label",
            Method::DisturbValue => "disturb_value",
            Method::DisturbError => "disturb_error",
            Method::DisturbValueError => "disturb_value_error",
        }
    }

    pub fn is_classification(self) -> bool {
        matches!(self, Method::DisturbLabel | Method::DirectionalDisturbLabel)
    }

    pub fn is_regression(self) -> bool {
        matches!(
            self,
            Method::DisturbValue | Method::DisturbError | Method::DisturbValueError
        )
    }

    /// Whether the method needs the current batch predictions.
    pub fn uses_predictions(self) -> bool {
        matches!(
            self,
            Method::DirectionalDisturbLabel | Method::DisturbError | Method::DisturbValueError
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    Gaussian,
    /// Laplace noise with scale `σ/√2`, i.e. the same variance as the Gaussian.
    Laplacian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaSchedule {
    Constant,
    CosineAnneal,
}

/// Quantity driven by the cosine schedule when it is active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnnealTarget {
    Sigma,
    Alpha,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegularizerSpec {
    pub method: Method,
    /// Noise rate α, as a percentage of the batch.
    pub alpha_pct: f64,
    pub sigma: f64,
    /// DE residual boundary.
    pub rho: f64,
    pub noise_kind: NoiseKind,
    pub sigma_schedule: SigmaSchedule,
    pub anneal: AnnealTarget,
    /// DDL gate `cos θ`; 0.5 corresponds to θ = π/3.
    pub confidence_threshold: f64,
}

impl Default for RegularizerSpec {
    fn default() -> Self {
        Self {
            method: Method::None,
            alpha_pct: 0.0,
            sigma: 0.01,
            rho: 0.0,
            noise_kind: NoiseKind::Gaussian,
            sigma_schedule: SigmaSchedule::Constant,
            anneal: AnnealTarget::Sigma,
            confidence_threshold: 0.5,
        }
    }
}

impl RegularizerSpec {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn disturb_label(alpha_pct: f64) -> Self {
        Self {
            method: Method::DisturbLabel,
            alpha_pct,
            ..Self::default()
        }
    }

    pub fn directional_disturb_label(alpha_pct: f64) -> Self {
        Self {
            method: Method::DirectionalDisturbLabel,
            alpha_pct,
            ..Self::default()
        }
    }

    pub fn disturb_value(alpha_pct: f64, sigma: f64) -> Self {
        Self {
            method: Method::DisturbValue,
            alpha_pct,
            sigma,
            ..Self::default()
        }
    }

    pub fn disturb_error(rho: f64, sigma: f64) -> Self {
        Self {
            method: Method::DisturbError,
            rho,
            sigma,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=100.0).contains(&self.alpha_pct) {
            return Err(Error::Config(format!(
                "alpha_pct {} outside [0, 100]",
                self.alpha_pct
            )));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::Config(format!(
                "sigma {} must be positive",
                self.sigma
            )));
        }
        if !(self.rho >= 0.0 && self.rho.is_finite()) {
            return Err(Error::Config(format!(
                "rho {} must be non-negative",
                self.rho
            )));
        }
        if !(0.0..=1.0).contains(&self.confidence_threshold) {
            return Err(Error::Config(format!(
                "confidence threshold {} outside [0, 1]",
                self.confidence_threshold
            )));
        }
        Ok(())
    }

    /// Rejects label methods on mse networks and value methods on
    /// cross-entropy networks.
    pub fn check_compatible(&self, loss: LossKind) -> Result<()> {
        let ok = match loss {
            LossKind::CrossEntropy => !self.method.is_regression(),
            LossKind::Mse => !self.method.is_classification(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "regularizer `{}` is incompatible with {} loss",
                self.method.name(),
                match loss {
                    LossKind::CrossEntropy => "cross-entropy",
                    LossKind::Mse => "mse",
                }
            )))
        }
    }

    /// `(α, σ)` in effect at `epoch`, after the cosine schedule if enabled.
    pub fn effective(&self, epoch: usize, total_epochs: usize) -> Result<(f64, f64)> {
        match self.sigma_schedule {
            SigmaSchedule::Constant => Ok((self.alpha_pct, self.sigma)),
            SigmaSchedule::CosineAnneal => {
                let factor = sigma_at_epoch(1.0, epoch, total_epochs)?;
                Ok(match self.anneal {
                    AnnealTarget::Sigma => (self.alpha_pct, self.sigma * factor),
                    AnnealTarget::Alpha => (self.alpha_pct * factor, self.sigma),
                })
            }
        }
    }
}

/// Output of a disturbance: the new batch plus the positions that were
/// selected for resampling or noise.
#[derive(Debug, Clone, PartialEq)]
pub struct Disturbance<T> {
    pub output: Vec<T>,
    /// Sorted positions that were disturbed. A resampled label may still equal
    /// the original.
    pub selected: Vec<usize>,
}

impl<T: PartialEq> Disturbance<T> {
    fn unchanged(input: &[T]) -> Self
    where
        T: Clone,
    {
        Self {
            output: input.to_vec(),
            selected: Vec::new(),
        }
    }

    /// Number of entries whose value actually differs from `input`.
    pub fn changed(&self, input: &[T]) -> usize {
        self.output
            .iter()
            .zip(input)
            .filter(|(a, b)| a != b)
            .count()
    }
}

/// `⌊α/100 · batch_size⌋`
pub fn disturb_count(alpha_pct: f64, batch_size: usize) -> usize {
    if alpha_pct <= 0.0 {
        return 0;
    }
    let k = (alpha_pct * batch_size as f64 / 100.0).floor() as usize;
    k.min(batch_size)
}

/// Resamples one label from the multinoulli with `p_c` on `label` and `p_i`
/// on every other class.
pub fn resample_label(label: usize, alpha_pct: f64, classes: usize, rng: &mut SeededRng) -> usize {
    let p_other = alpha_pct / (100.0 * classes as f64);
    let p_true = 1.0 - (classes as f64 - 1.0) * p_other;
    if rng.random::<f64>() < p_true {
        return label;
    }
    // Uniform over the C−1 other classes.
    let pick = rng.random_range(0..classes - 1);
    if pick >= label {
        pick + 1
    } else {
        pick
    }
}

fn check_labels(labels: &[usize], alpha_pct: f64, classes: usize) -> Result<()> {
    if classes < 2 {
        return Err(Error::Domain(format!(
            "need at least 2 classes, got {classes}"
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::Domain(format!(
            "label {bad} out of range for {classes} classes"
        )));
    }
    let p_true = 1.0 - (classes as f64 - 1.0) * alpha_pct / (100.0 * classes as f64);
    if !(0.0..=100.0).contains(&alpha_pct) || p_true < 0.0 {
        return Err(Error::InvalidAlpha {
            alpha: alpha_pct,
            classes,
        });
    }
    Ok(())
}

fn choose(rng: &mut SeededRng, from: usize, amount: usize) -> Vec<usize> {
    let mut picked = index::sample(rng, from, amount).into_vec();
    picked.sort_unstable();
    picked
}

/// DisturbLabel on one batch.
pub fn disturb_labels(
    labels: &[usize],
    alpha_pct: f64,
    classes: usize,
    rng: &mut SeededRng,
) -> Result<Disturbance<usize>> {
    check_labels(labels, alpha_pct, classes)?;
    let k = disturb_count(alpha_pct, labels.len());
    if k == 0 {
        return Ok(Disturbance::unchanged(labels));
    }
    let selected = choose(rng, labels.len(), k);
    let mut output = labels.to_vec();
    for &i in &selected {
        output[i] = resample_label(labels[i], alpha_pct, classes, rng);
    }
    Ok(Disturbance { output, selected })
}

/// `probs[n, label_n] / ‖probs[n, ·]‖₂`, the cosine between the one-hot label
/// and the prediction.
pub fn confidence_scores(labels: &[usize], probs: &Matrix) -> Result<Vec<f64>> {
    if labels.len() != probs.rows() {
        return Err(Error::Shape(format!(
            "{} labels vs {} prediction rows",
            labels.len(),
            probs.rows()
        )));
    }
    labels
        .iter()
        .zip(probs.row_iter())
        .map(|(&l, row)| {
            if l >= row.len() {
                return Err(Error::Domain(format!(
                    "label {l} out of range for {} classes",
                    row.len()
                )));
            }
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 {
                return Err(Error::Contract("prediction row has zero norm".into()));
            }
            Ok(row[l] / norm)
        })
        .collect()
}

/// Directional DisturbLabel on one batch.
///
/// Candidates are samples scoring at least `threshold`; `⌊αN/100⌋` of them
/// (capped by the candidate count) are resampled as in DL.
pub fn directional_disturb_labels(
    labels: &[usize],
    probs: &Matrix,
    alpha_pct: f64,
    threshold: f64,
    rng: &mut SeededRng,
) -> Result<Disturbance<usize>> {
    let classes = probs.cols();
    check_labels(labels, alpha_pct, classes)?;
    let k = disturb_count(alpha_pct, labels.len());
    if k == 0 {
        return Ok(Disturbance::unchanged(labels));
    }
    let scores = confidence_scores(labels, probs)?;
    let candidates: Vec<usize> = scores
        .iter()
        .enumerate()
        .filter(|(_, &s)| s >= threshold)
        .map(|(i, _)| i)
        .collect();
    let k = k.min(candidates.len());
    if k == 0 {
        return Ok(Disturbance::unchanged(labels));
    }
    let selected: Vec<usize> = choose(rng, candidates.len(), k)
        .into_iter()
        .map(|j| candidates[j])
        .collect();
    let mut output = labels.to_vec();
    for &i in &selected {
        output[i] = resample_label(labels[i], alpha_pct, classes, rng);
    }
    Ok(Disturbance { output, selected })
}

/// `σ_max · ½(1 + cos(π · epoch / (total − 1)))`
pub fn sigma_at_epoch(sigma_max: f64, epoch: usize, total_epochs: usize) -> Result<f64> {
    if total_epochs < 2 {
        return Err(Error::Domain(format!(
            "cosine schedule needs at least 2 epochs, got {total_epochs}"
        )));
    }
    if epoch >= total_epochs {
        return Err(Error::Domain(format!(
            "epoch {epoch} outside schedule of {total_epochs} epochs"
        )));
    }
    if epoch == total_epochs - 1 {
        return Ok(0.0);
    }
    let t = epoch as f64 / (total_epochs - 1) as f64;
    Ok(sigma_max * 0.5 * (1.0 + (std::f64::consts::PI * t).cos()))
}

/// One zero-mean noise draw of standard deviation `sigma`.
pub fn sample_noise(kind: NoiseKind, sigma: f64, rng: &mut SeededRng) -> f64 {
    match kind {
        NoiseKind::Gaussian => sigma * rng.sample::<f64, _>(StandardNormal),
        NoiseKind::Laplacian => {
            // Inverse CDF on u ∈ (−½, ½), scale b = σ/√2.
            let b = sigma / std::f64::consts::SQRT_2;
            let u: f64 = loop {
                let u = rng.random::<f64>() - 0.5;
                if u != -0.5 {
                    break u;
                }
            };
            -b * u.signum() * (1.0 - 2.0 * u.abs()).ln()
        }
    }
}

fn warn_unscaled(targets: &[f64]) {
    let outside = targets.iter().filter(|v| !(0.0..=1.0).contains(*v)).count();
    if outside > 0 {
        log::warn!("{outside} target(s) outside [0, 1]; disturbance assumes MinMax-scaled targets");
    }
}

/// DisturbValue on one batch.
pub fn disturb_values(
    targets: &[f64],
    spec: &RegularizerSpec,
    epoch: usize,
    total_epochs: usize,
    rng: &mut SeededRng,
) -> Result<Disturbance<f64>> {
    if !matches!(
        spec.method,
        Method::DisturbValue | Method::DisturbValueError
    ) {
        return Err(Error::Contract(format!(
            "disturb_values called with method `{}`",
            spec.method.name()
        )));
    }
    let (alpha, sigma) = spec.effective(epoch, total_epochs)?;
    let k = disturb_count(alpha, targets.len());
    if k == 0 {
        return Ok(Disturbance::unchanged(targets));
    }
    warn_unscaled(targets);
    let selected = choose(rng, targets.len(), k);
    let mut output = targets.to_vec();
    for &i in &selected {
        output[i] += sample_noise(spec.noise_kind, sigma, rng);
    }
    Ok(Disturbance { output, selected })
}

/// DisturbError on one batch: Gaussian noise on every target with
/// `|y − ŷ| < ρ`.
pub fn disturb_errors(
    targets: &[f64],
    preds: &Matrix,
    spec: &RegularizerSpec,
    rng: &mut SeededRng,
) -> Result<Disturbance<f64>> {
    if !matches!(
        spec.method,
        Method::DisturbError | Method::DisturbValueError
    ) {
        return Err(Error::Contract(format!(
            "disturb_errors called with method `{}`",
            spec.method.name()
        )));
    }
    if preds.rows() != targets.len() || preds.cols() != 1 {
        return Err(Error::Shape(format!(
            "{} targets vs {}x{} predictions",
            targets.len(),
            preds.rows(),
            preds.cols()
        )));
    }
    let selected: Vec<usize> = targets
        .iter()
        .zip(preds.as_slice())
        .enumerate()
        .filter(|(_, (y, p))| (*y - *p).abs() < spec.rho)
        .map(|(i, _)| i)
        .collect();
    if selected.is_empty() {
        return Ok(Disturbance::unchanged(targets));
    }
    warn_unscaled(targets);
    let mut output = targets.to_vec();
    for &i in &selected {
        output[i] += sample_noise(NoiseKind::Gaussian, spec.sigma, rng);
    }
    Ok(Disturbance { output, selected })
}
