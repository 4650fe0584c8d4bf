//! Experiment configuration, its canonical digest, and dotted-key overrides.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::data::{self, Dataset, Task};
use crate::disturb::{Method, RegularizerSpec, SigmaSchedule};
use crate::error::{Error, Result};
use crate::nn::{LossKind, NetworkSpec, OptimizerConfig};

/// Where the data comes from. Serialized externally tagged, e.g.
/// `{"csv": {"path": "data/boston.csv", "target": "MEDV", "task": "regression"}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetSource {
    Csv(CsvSource),
    Idx(IdxSource),
    SyntheticRegression(SyntheticRegression),
    SyntheticClassification(SyntheticClassification),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvSource {
    pub path: PathBuf,
    pub target: String,
    pub task: Task,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdxSource {
    pub images: PathBuf,
    pub labels: PathBuf,
    /// Keep only the first `limit` examples.
    #[serde(default)]
    pub limit: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticRegression {
    pub n: usize,
    pub p: usize,
    pub informative: usize,
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for SyntheticRegression {
    fn default() -> Self {
        Self {
            n: 5000,
            p: 30,
            informative: 10,
            noise_std: 0.1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticClassification {
    pub n: usize,
    pub classes: usize,
    pub p: usize,
    pub separation: f64,
    pub seed: u64,
}

impl Default for SyntheticClassification {
    fn default() -> Self {
        Self {
            n: 1000,
            classes: 10,
            p: 20,
            separation: 4.0,
            seed: 0,
        }
    }
}

impl DatasetSource {
    pub fn task(&self) -> Task {
        match self {
            DatasetSource::Csv(c) => c.task,
            DatasetSource::Idx(_) | DatasetSource::SyntheticClassification(_) => {
                Task::Classification
            }
            DatasetSource::SyntheticRegression(_) => Task::Regression,
        }
    }

    pub fn default_name(&self) -> String {
        match self {
            DatasetSource::Csv(c) => c
                .path
                .file_stem()
                .map_or_else(|| "csv".to_owned(), |s| s.to_string_lossy().into_owned()),
            DatasetSource::Idx(_) => "idx".to_owned(),
            DatasetSource::SyntheticRegression(_) => "synthetic_regression".to_owned(),
            DatasetSource::SyntheticClassification(_) => "synthetic_classification".to_owned(),
        }
    }

    pub fn load(&self) -> Result<Dataset> {
        match self {
            DatasetSource::Csv(c) => Ok(data::load_csv(&c.path, &c.target, c.task)?.dataset),
            DatasetSource::Idx(s) => {
                let ds = data::load_idx(&s.images, &s.labels)?;
                Ok(match s.limit {
                    Some(limit) if limit < ds.len() => ds.subset(&(0..limit).collect::<Vec<_>>()),
                    _ => ds,
                })
            }
            DatasetSource::SyntheticRegression(s) => {
                data::make_synthetic_regression(s.n, s.p, s.informative, s.noise_std, s.seed)
            }
            DatasetSource::SyntheticClassification(s) => {
                data::make_synthetic_classification(s.n, s.classes, s.p, s.separation, s.seed)
            }
        }
    }
}

/// The network shape parameters a user controls; input and output widths
/// come from the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub hidden_dims: Vec<usize>,
    pub dropout_rate: f64,
    pub l2_lambda: f64,
    /// Defaults to the task's natural loss.
    #[serde(default)]
    pub loss: Option<LossKind>,
}

impl NetworkConfig {
    pub fn spec(&self, task: Task, input_dim: usize, output_dim: usize) -> NetworkSpec {
        NetworkSpec {
            input_dim,
            hidden_dims: self.hidden_dims.clone(),
            output_dim,
            loss: self.loss.unwrap_or(task.loss()),
            dropout_rate: self.dropout_rate,
            l2_lambda: self.l2_lambda,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub runs: usize,
    /// Run `r` uses seed `base_seed + r`.
    pub base_seed: u64,
    pub train_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Dataset label used in reports.
    #[serde(default)]
    pub name: Option<String>,
    pub dataset: DatasetSource,
    pub network: NetworkConfig,
    pub regularizer: RegularizerSpec,
    pub optimizer: OptimizerConfig,
    pub protocol: ProtocolConfig,
}

impl ExperimentConfig {
    /// Task defaults.
    ///
    /// Regression: 64-64 ReLU, Adam at 0.001, 200 epochs, batch 32, 20 runs,
    /// 50/50 split. Classification: 256-128 ReLU, SGD with momentum at 0.001
    /// decayed at 40/60/80, 100 epochs, batch 64, 5 runs, 80/20 split.
    pub fn with_defaults(dataset: DatasetSource) -> Self {
        let (network, optimizer, protocol) = match dataset.task() {
            Task::Regression => (
                NetworkConfig {
                    hidden_dims: vec![64, 64],
                    dropout_rate: 0.0,
                    l2_lambda: 0.0,
                    loss: None,
                },
                OptimizerConfig::adam(0.001),
                ProtocolConfig {
                    epochs: 200,
                    batch_size: 32,
                    runs: 20,
                    base_seed: 0,
                    train_fraction: 0.5,
                },
            ),
            Task::Classification => (
                NetworkConfig {
                    hidden_dims: vec![256, 128],
                    dropout_rate: 0.0,
                    l2_lambda: 0.0,
                    loss: None,
                },
                OptimizerConfig::sgd_momentum(0.001),
                ProtocolConfig {
                    epochs: 100,
                    batch_size: 64,
                    runs: 5,
                    base_seed: 0,
                    train_fraction: 0.8,
                },
            ),
        };
        Self {
            name: None,
            dataset,
            network,
            regularizer: RegularizerSpec::none(),
            optimizer,
            protocol,
        }
    }

    pub fn task(&self) -> Task {
        self.dataset.task()
    }

    pub fn loss(&self) -> LossKind {
        self.network.loss.unwrap_or(self.task().loss())
    }

    pub fn dataset_name(&self) -> String {
        self.name
            .clone()
            .unwrap_or_else(|| self.dataset.default_name())
    }

    /// Row label for reports, e.g. `dv-gauss`, `dv-lapl+dropout`, `l2`.
    pub fn method_label(&self) -> String {
        let r = &self.regularizer;
        let mut parts: Vec<String> = Vec::new();
        let noise = |base: &str| -> String {
            if r.sigma_schedule == SigmaSchedule::CosineAnneal {
                format!("{base}-anneal")
            } else {
                match r.noise_kind {
                    crate::disturb::NoiseKind::Gaussian => format!("{base}-gauss"),
                    crate::disturb::NoiseKind::Laplacian => format!("{base}-lapl"),
                }
            }
        };
        match r.method {
            Method::None => {}
            Method::DisturbLabel => parts.push("dl".into()),
            Method::DirectionalDisturbLabel => parts.push("ddl".into()),
            Method::DisturbValue => parts.push(noise("dv")),
            Method::DisturbError => parts.push("de".into()),
            Method::DisturbValueError => parts.push(format!("{}+de", noise("dv"))),
        }
        if self.network.dropout_rate > 0.0 {
            parts.push("dropout".into());
        }
        if self.network.l2_lambda > 0.0 {
            parts.push("l2".into());
        }
        if parts.is_empty() {
            "none".into()
        } else {
            parts.join("+")
        }
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.protocol;
        if p.runs == 0 || p.epochs == 0 || p.batch_size == 0 {
            return Err(Error::Config(
                "runs, epochs and batch_size must all be at least 1".into(),
            ));
        }
        if !(p.train_fraction > 0.0 && p.train_fraction < 1.0) {
            return Err(Error::Config(format!(
                "train_fraction {} outside (0, 1)",
                p.train_fraction
            )));
        }
        self.optimizer.validate()?;
        self.regularizer.validate()?;
        let task = self.task();
        let loss = self.loss();
        if loss != task.loss() {
            return Err(Error::Config(format!(
                "{loss:?} loss does not fit a {task:?} dataset"
            )));
        }
        self.regularizer.check_compatible(loss)?;
        if self.regularizer.sigma_schedule == SigmaSchedule::CosineAnneal && p.epochs < 2 {
            return Err(Error::Config(
                "cosine annealing needs at least 2 epochs".into(),
            ));
        }
        // Output width is data dependent; 2 is a placeholder that satisfies
        // the cross-entropy minimum.
        let out = if loss == LossKind::Mse { 1 } else { 2 };
        self.network.spec(task, 1, out).validate()
    }

    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("config serializes")
    }

    pub fn from_value(value: Value) -> Result<Self> {
        let cfg: Self = serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Canonical serialization: sorted keys, shortest round-trip floats.
    pub fn canonical_json(&self) -> String {
        // `Value` objects are BTreeMap-backed, so keys come out sorted.
        serde_json::to_string(&self.to_value()).expect("config serializes")
    }

    /// First 16 hex digits of the SHA-256 of [`Self::canonical_json`].
    pub fn digest(&self) -> String {
        let hash = Sha256::digest(self.canonical_json().as_bytes());
        hash.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    /// Applies `key=value` overrides (see [`apply_override`]) and revalidates.
    pub fn with_overrides<'a>(
        &self,
        overrides: impl IntoIterator<Item = (&'a str, Value)>,
    ) -> Result<Self> {
        let mut value = self.to_value();
        for (k, v) in overrides {
            apply_override(&mut value, k, v)?;
        }
        Self::from_value(value)
    }
}

/// Short names accepted wherever a dotted config key is.
pub fn resolve_key(key: &str) -> &str {
    match key {
        "alpha" | "disturb_rate" => "regularizer.alpha_pct",
        "sigma" => "regularizer.sigma",
        "rho" | "residual" => "regularizer.rho",
        "l2" | "l2_penalty" => "network.l2_lambda",
        "dropout" | "drop_rate" => "network.dropout_rate",
        "runs" => "protocol.runs",
        "seed" => "protocol.base_seed",
        "epochs" => "protocol.epochs",
        "batch_size" => "protocol.batch_size",
        "lr" => "optimizer.learning_rate",
        other => other,
    }
}

/// Sets the value at a dotted path. Every segment must already exist.
pub fn apply_override(root: &mut Value, key: &str, value: Value) -> Result<()> {
    let key = resolve_key(key);
    let mut node = root;
    let mut segments = key.split('.').peekable();
    while let Some(seg) = segments.next() {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| Error::UnknownKey(key.to_owned()))?;
        let child = obj
            .get_mut(seg)
            .ok_or_else(|| Error::UnknownKey(key.to_owned()))?;
        if segments.peek().is_none() {
            *child = value;
            return Ok(());
        }
        node = child;
    }
    Err(Error::UnknownKey(key.to_owned()))
}

/// Interprets the right-hand side of `key=value`: JSON if it parses, a bare
/// string otherwise.
pub fn parse_override_value(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_owned()))
}

/// Splits `key=value`.
pub fn parse_override(spec: &str) -> Result<(String, Value)> {
    let (k, v) = spec
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{spec}` is not of the form key=value")))?;
    Ok((k.trim().to_owned(), parse_override_value(v.trim())))
}
