//! Exhaustive grid search over configuration keys.

use serde_json::Value;

use super::config::{apply_override, resolve_key, ExperimentConfig};
use super::run::run_on;
use super::summary::{aggregate, Summary};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct GridOptions {
    /// Runs per grid point; `None` keeps the configured count.
    pub runs: Option<usize>,
    pub max_points: usize,
}

impl Default for GridOptions {
    fn default() -> Self {
        Self {
            runs: Some(5),
            max_points: 256,
        }
    }
}

/// One axis of the grid: a config key (dotted or short alias) and its values.
#[derive(Debug, Clone, PartialEq)]
pub struct GridAxis {
    pub key: String,
    pub values: Vec<Value>,
}

impl GridAxis {
    pub fn new(key: impl Into<String>, values: impl IntoIterator<Item = Value>) -> Self {
        Self {
            key: key.into(),
            values: values.into_iter().collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct GridRow {
    pub point: Vec<(String, Value)>,
    pub summary: Summary,
}

#[derive(Debug, Clone)]
pub struct GridOutcome {
    /// Winning value per axis, in axis order.
    pub best: Vec<(String, Value)>,
    /// Base configuration with the winning point applied (original run count).
    pub best_config: ExperimentConfig,
    pub rows: Vec<GridRow>,
}

impl GridOutcome {
    pub fn best_row(&self) -> &GridRow {
        self.rows
            .iter()
            .find(|r| r.point == self.best)
            .expect("best point is one of the rows")
    }
}

/// Cartesian product in row-major order (last axis varies fastest).
fn points(axes: &[GridAxis]) -> Vec<Vec<(String, Value)>> {
    let mut out = vec![Vec::new()];
    for axis in axes {
        out = out
            .into_iter()
            .flat_map(|prefix: Vec<(String, Value)>| {
                axis.values.iter().map(move |v| {
                    let mut p = prefix.clone();
                    p.push((axis.key.clone(), v.clone()));
                    p
                })
            })
            .collect();
    }
    out
}

/// Evaluates every grid point and returns the one with the lowest mean test
/// metric. Ties go to the earliest point.
pub fn grid_search(
    base: &ExperimentConfig,
    axes: &[GridAxis],
    options: &GridOptions,
) -> Result<GridOutcome> {
    base.validate()?;
    if axes.is_empty() || axes.iter().any(|a| a.values.is_empty()) {
        return Err(Error::Config("grid axes must be non-empty".into()));
    }
    let base_value = base.to_value();
    for axis in axes {
        // Validate names up front so a typo fails before any training.
        let mut probe = base_value.clone();
        apply_override(&mut probe, &axis.key, axis.values[0].clone())?;
    }
    let size: usize = axes.iter().map(|a| a.values.len()).product();
    if size > options.max_points {
        return Err(Error::Config(format!(
            "grid has {size} points, more than the cap of {}",
            options.max_points
        )));
    }

    let data = base.dataset.load()?;
    let mut rows = Vec::with_capacity(size);
    let mut best: Option<(usize, f64)> = None;
    for (i, point) in points(axes).into_iter().enumerate() {
        let mut value = base_value.clone();
        for (k, v) in &point {
            apply_override(&mut value, k, v.clone())?;
        }
        if let Some(runs) = options.runs {
            apply_override(&mut value, "protocol.runs", Value::from(runs))?;
        }
        let cfg = ExperimentConfig::from_value(value)?;
        log::info!("grid point {}/{size}: {point:?}", i + 1);
        let summary = aggregate(&run_on(&cfg, &data)?)?;
        if best.is_none_or(|(_, m)| summary.mean < m) {
            best = Some((i, summary.mean));
        }
        rows.push(GridRow { point, summary });
    }
    let (best_idx, _) = best.expect("grid is non-empty");
    let best_point = rows[best_idx].point.clone();
    let best_config =
        base.with_overrides(best_point.iter().map(|(k, v)| (resolve_key(k), v.clone())))?;
    Ok(GridOutcome {
        best: best_point,
        best_config,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn product_order() {
        let axes = [
            GridAxis::new("a", [json!(1), json!(2)]),
            GridAxis::new("b", [json!("x"), json!("y"), json!("z")]),
        ];
        let p = points(&axes);
        assert_eq!(p.len(), 6);
        assert_eq!(p[0], vec![("a".into(), json!(1)), ("b".into(), json!("x"))]);
        assert_eq!(p[1][1].1, json!("y"));
        assert_eq!(p[3][0].1, json!(2));
    }
}
