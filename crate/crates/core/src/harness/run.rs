//! Training and evaluation of one experiment configuration.

use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::data::{split_shuffle, Dataset, TargetData};
use crate::disturb::{self, Disturbance, Method};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::{self, argmax_rows, Network, Optimizer, Targets};
use crate::rng::{stream, SeededRng, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// Root-mean-square error on MinMax-scaled targets.
    Rmse,
    /// Percentage of argmax predictions that miss the label.
    MisclassificationPct,
}

/// Identifies which table cell a run belongs to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLabel {
    pub dataset: String,
    pub method: String,
    pub alpha: f64,
    pub sigma: f64,
    pub rho: f64,
}

impl RunLabel {
    pub fn from_config(cfg: &ExperimentConfig) -> Self {
        Self {
            dataset: cfg.dataset_name(),
            method: cfg.method_label(),
            alpha: cfg.regularizer.alpha_pct,
            sigma: cfg.regularizer.sigma,
            rho: cfg.regularizer.rho,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub run_index: usize,
    pub seed: u64,
    pub metric: Metric,
    /// Test metric after the last epoch.
    pub final_test_metric: f64,
    /// Clean (undisturbed, no dropout) metric on the training split per epoch.
    pub train_curve: Vec<f64>,
    pub test_curve: Vec<f64>,
    /// Mean minibatch training loss per epoch, against the targets actually
    /// used for the update.
    pub loss_curve: Vec<f64>,
    /// Targets selected for disturbance per epoch.
    pub disturbed_per_epoch: Vec<usize>,
    /// Targets whose value actually changed per epoch.
    pub changed_per_epoch: Vec<usize>,
    pub wall_time_secs: f64,
    pub config_digest: String,
    pub label: RunLabel,
}

/// Runs every configured run in sequence.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<RunReport>> {
    cfg.validate()?;
    let data = cfg.dataset.load()?;
    run_on(cfg, &data)
}

/// As [`run_experiment`], with runs spread over `threads` workers. Results are
/// identical to the sequential path.
pub fn run_experiment_concurrent(cfg: &ExperimentConfig, threads: usize) -> Result<Vec<RunReport>> {
    cfg.validate()?;
    let data = cfg.dataset.load()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let digest = cfg.digest();
    pool.install(|| {
        (0..cfg.protocol.runs)
            .into_par_iter()
            .map(|r| train_run(cfg, &data, r, &digest))
            .collect()
    })
}

/// Runs every configured run on an already loaded dataset.
pub fn run_on(cfg: &ExperimentConfig, data: &Dataset) -> Result<Vec<RunReport>> {
    cfg.validate()?;
    let digest = cfg.digest();
    (0..cfg.protocol.runs)
        .map(|r| train_run(cfg, data, r, &digest))
        .collect()
}

/// One run: reshuffle and split with the run seed, fit scalers on the
/// training split, train, and evaluate on clean targets after every epoch.
pub fn train_run(
    cfg: &ExperimentConfig,
    data: &Dataset,
    run_index: usize,
    digest: &str,
) -> Result<RunReport> {
    if data.task() != cfg.task() {
        return Err(Error::Config(format!(
            "dataset is {:?} but configuration expects {:?}",
            data.task(),
            cfg.task()
        )));
    }
    let started = Instant::now();
    let seed = cfg.protocol.base_seed.wrapping_add(run_index as u64);
    let (mut train, mut test) = split_shuffle(data, cfg.protocol.train_fraction, seed)?;
    train.scale_with(&mut test)?;

    let output_dim = data.classes().unwrap_or(1);
    let spec = cfg.network.spec(cfg.task(), data.n_features(), output_dim);
    let mut net = Network::new(spec, &mut stream(seed, Stream::Init))?;
    let mut optimizer = Optimizer::new(cfg.optimizer.clone())?;
    let mut train_rng = stream(seed, Stream::Training);
    let mut disturb_rng = stream(seed, Stream::Disturbance);

    let epochs = cfg.protocol.epochs;
    let metric = match cfg.task() {
        crate::data::Task::Regression => Metric::Rmse,
        crate::data::Task::Classification => Metric::MisclassificationPct,
    };
    let mut report = RunReport {
        run_index,
        seed,
        metric,
        final_test_metric: f64::NAN,
        train_curve: Vec::with_capacity(epochs),
        test_curve: Vec::with_capacity(epochs),
        loss_curve: Vec::with_capacity(epochs),
        disturbed_per_epoch: Vec::with_capacity(epochs),
        changed_per_epoch: Vec::with_capacity(epochs),
        wall_time_secs: 0.0,
        config_digest: digest.to_owned(),
        label: RunLabel::from_config(cfg),
    };

    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 0..epochs {
        optimizer.start_epoch(epoch);
        order.shuffle(&mut train_rng);
        let mut loss_sum = 0.0;
        let mut disturbed = 0;
        let mut changed = 0;
        for batch in order.chunks(cfg.protocol.batch_size) {
            let x = train.features.select_rows(batch);
            let (out, cache) = net.forward(&x, true, Some(&mut train_rng))?;
            let step = match &train.targets {
                TargetData::Labels { labels, classes } => {
                    let clean: Vec<usize> = batch.iter().map(|&i| labels[i]).collect();
                    let d =
                        disturb_label_batch(cfg, &clean, *classes, &out, epoch, &mut disturb_rng)?;
                    disturbed += d.selected.len();
                    changed += d.changed(&clean);
                    let targets = Targets::Labels(&d.output);
                    (
                        nn::loss(&out, targets, net.spec().loss)?,
                        net.backward(&cache, targets)?,
                    )
                }
                TargetData::Values(values) => {
                    let clean: Vec<f64> = batch.iter().map(|&i| values[i]).collect();
                    let d = disturb_value_batch(cfg, &clean, &out, epoch, &mut disturb_rng)?;
                    disturbed += d.selected.len();
                    changed += d.changed(&clean);
                    let targets = Targets::Values(&d.output);
                    (
                        nn::loss(&out, targets, net.spec().loss)?,
                        net.backward(&cache, targets)?,
                    )
                }
            };
            let (batch_loss, grads) = step;
            if !batch_loss.is_finite() || !grads.is_finite() {
                return Err(Error::NonFinite(format!(
                    "training diverged in epoch {epoch} of run {run_index}"
                )));
            }
            loss_sum += batch_loss * batch.len() as f64;
            optimizer.step(&mut net, &grads)?;
        }
        report.loss_curve.push(loss_sum / train.len() as f64);
        report.disturbed_per_epoch.push(disturbed);
        report.changed_per_epoch.push(changed);
        report.train_curve.push(evaluate(&net, &train)?);
        report.test_curve.push(evaluate(&net, &test)?);
    }
    report.final_test_metric = *report.test_curve.last().expect("epochs >= 1");
    report.wall_time_secs = started.elapsed().as_secs_f64();
    Ok(report)
}

fn disturb_label_batch(
    cfg: &ExperimentConfig,
    clean: &[usize],
    classes: usize,
    probs: &Matrix,
    epoch: usize,
    rng: &mut SeededRng,
) -> Result<Disturbance<usize>> {
    let spec = &cfg.regularizer;
    let (alpha, _) = spec.effective(epoch, cfg.protocol.epochs)?;
    match spec.method {
        Method::DisturbLabel => disturb::disturb_labels(clean, alpha, classes, rng),
        Method::DirectionalDisturbLabel => {
            disturb::directional_disturb_labels(clean, probs, alpha, spec.confidence_threshold, rng)
        }
        _ => Ok(Disturbance {
            output: clean.to_vec(),
            selected: Vec::new(),
        }),
    }
}

fn disturb_value_batch(
    cfg: &ExperimentConfig,
    clean: &[f64],
    preds: &Matrix,
    epoch: usize,
    rng: &mut SeededRng,
) -> Result<Disturbance<f64>> {
    let spec = &cfg.regularizer;
    let epochs = cfg.protocol.epochs;
    match spec.method {
        Method::DisturbValue => disturb::disturb_values(clean, spec, epoch, epochs, rng),
        Method::DisturbError => disturb::disturb_errors(clean, preds, spec, rng),
        Method::DisturbValueError => {
            // The residual gate looks at the clean targets.
            let de = disturb::disturb_errors(clean, preds, spec, rng)?;
            let dv = disturb::disturb_values(&de.output, spec, epoch, epochs, rng)?;
            let mut selected = de.selected;
            selected.extend(dv.selected);
            selected.sort_unstable();
            selected.dedup();
            Ok(Disturbance {
                output: dv.output,
                selected,
            })
        }
        _ => Ok(Disturbance {
            output: clean.to_vec(),
            selected: Vec::new(),
        }),
    }
}

const EVAL_CHUNK: usize = 1024;

/// Clean evaluation-mode metric: RMSE for regression, misclassification
/// percentage for classification.
pub fn evaluate(net: &Network, data: &Dataset) -> Result<f64> {
    let n = data.len();
    if n == 0 {
        return Err(Error::Domain("cannot evaluate on an empty split".into()));
    }
    let mut acc = 0.0;
    let indices: Vec<usize> = (0..n).collect();
    for chunk in indices.chunks(EVAL_CHUNK) {
        let x = data.features.select_rows(chunk);
        let out = net.predict(&x)?;
        match &data.targets {
            TargetData::Values(v) => {
                for (p, &i) in out.as_slice().iter().zip(chunk) {
                    acc += (p - v[i]) * (p - v[i]);
                }
            }
            TargetData::Labels { labels, .. } => {
                for (pred, &i) in argmax_rows(&out).into_iter().zip(chunk) {
                    if pred != labels[i] {
                        acc += 1.0;
                    }
                }
            }
        }
    }
    let value = match data.targets {
        TargetData::Values(_) => (acc / n as f64).sqrt(),
        TargetData::Labels { .. } => 100.0 * acc / n as f64,
    };
    if !value.is_finite() {
        return Err(Error::NonFinite("evaluation metric".into()));
    }
    Ok(value)
}
