//! Datasets: ingestion, scaling, splitting and synthetic generators.

mod csv;
mod idx;
mod scale;
mod split;
mod synth;

pub use self::csv::{load_csv, CsvLoad};
pub use idx::load_idx;
pub use scale::MinMaxParams;
pub use split::split_shuffle;
pub use synth::{make_synthetic_classification, make_synthetic_regression};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::{LossKind, Targets};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Classification,
    Regression,
}

impl Task {
    pub fn loss(self) -> LossKind {
        match self {
            Task::Classification => LossKind::CrossEntropy,
            Task::Regression => LossKind::Mse,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TargetData {
    Labels { labels: Vec<usize>, classes: usize },
    Values(Vec<f64>),
}

impl TargetData {
    pub fn len(&self) -> usize {
        match self {
            TargetData::Labels { labels, .. } => labels.len(),
            TargetData::Values(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn task(&self) -> Task {
        match self {
            TargetData::Labels { .. } => Task::Classification,
            TargetData::Values(_) => Task::Regression,
        }
    }

    pub fn as_targets(&self) -> Targets<'_> {
        match self {
            TargetData::Labels { labels, .. } => Targets::Labels(labels),
            TargetData::Values(v) => Targets::Values(v),
        }
    }

    fn select(&self, indices: &[usize]) -> Self {
        match self {
            TargetData::Labels { labels, classes } => TargetData::Labels {
                labels: indices.iter().map(|&i| labels[i]).collect(),
                classes: *classes,
            },
            TargetData::Values(v) => TargetData::Values(indices.iter().map(|&i| v[i]).collect()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Matrix,
    pub targets: TargetData,
    pub feature_names: Option<Vec<String>>,
    /// Present once features have been MinMax-scaled.
    pub feature_scaler: Option<MinMaxParams>,
    /// Present once regression targets have been MinMax-scaled.
    pub target_scaler: Option<MinMaxParams>,
}

impl Dataset {
    pub fn new(features: Matrix, targets: TargetData) -> Result<Self> {
        if features.rows() != targets.len() {
            return Err(Error::Shape(format!(
                "{} feature rows vs {} targets",
                features.rows(),
                targets.len()
            )));
        }
        if let TargetData::Labels { labels, classes } = &targets {
            if let Some(&bad) = labels.iter().find(|&&l| l >= *classes) {
                return Err(Error::Domain(format!(
                    "label {bad} out of range for {classes} classes"
                )));
            }
        }
        Ok(Self {
            features,
            targets,
            feature_names: None,
            feature_scaler: None,
            target_scaler: None,
        })
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_features(&self) -> usize {
        self.features.cols()
    }

    pub fn task(&self) -> Task {
        self.targets.task()
    }

    pub fn classes(&self) -> Option<usize> {
        match &self.targets {
            TargetData::Labels { classes, .. } => Some(*classes),
            TargetData::Values(_) => None,
        }
    }

    /// Rows at `indices`, in that order. Scalers are carried over.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            features: self.features.select_rows(indices),
            targets: self.targets.select(indices),
            feature_names: self.feature_names.clone(),
            feature_scaler: self.feature_scaler.clone(),
            target_scaler: self.target_scaler.clone(),
        }
    }

    /// Fits MinMax scalers on `self` (features, and targets for regression)
    /// and applies them to both `self` and `other`.
    ///
    /// Only rows of `self` are consulted when fitting.
    pub fn scale_with(&mut self, other: &mut Dataset) -> Result<()> {
        let fx = MinMaxParams::fit(&self.features);
        self.features = fx.apply(&self.features)?;
        other.features = fx.apply(&other.features)?;
        self.feature_scaler = Some(fx.clone());
        other.feature_scaler = Some(fx);
        if let (TargetData::Values(train), TargetData::Values(test)) =
            (&mut self.targets, &mut other.targets)
        {
            let fy = MinMaxParams::fit_values(train);
            *train = fy.apply_values(train)?;
            *test = fy.apply_values(test)?;
            self.target_scaler = Some(fy.clone());
            other.target_scaler = Some(fy);
        }
        Ok(())
    }
}
