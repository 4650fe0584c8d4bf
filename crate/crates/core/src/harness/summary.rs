use serde::{Deserialize, Serialize};

use super::run::RunReport;
use crate::error::{Error, Result};

/// Mean ± sample standard deviation of the final test metric over runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub dataset: String,
    pub method: String,
    pub alpha: f64,
    pub sigma: f64,
    pub rho: f64,
    pub mean: f64,
    /// `N − 1` denominator; 0 for a single run.
    pub std: f64,
    pub runs: usize,
    pub digest: String,
    pub per_run: Vec<f64>,
}

impl Summary {
    /// `0.08958 ± 0.00312`-style cell text.
    pub fn cell(&self) -> String {
        format!("{:.5} ± {:.5}", self.mean, self.std)
    }
}

/// Sample mean and `N − 1` standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

pub fn aggregate(reports: &[RunReport]) -> Result<Summary> {
    let first = reports
        .first()
        .ok_or_else(|| Error::Contract("cannot aggregate zero reports".into()))?;
    if let Some(other) = reports
        .iter()
        .find(|r| r.config_digest != first.config_digest)
    {
        return Err(Error::Contract(format!(
            "reports from different configurations ({} vs {})",
            first.config_digest, other.config_digest
        )));
    }
    let per_run: Vec<f64> = reports.iter().map(|r| r.final_test_metric).collect();
    let (mean, std) = mean_std(&per_run);
    Ok(Summary {
        dataset: first.label.dataset.clone(),
        method: first.label.method.clone(),
        alpha: first.label.alpha,
        sigma: first.label.sigma,
        rho: first.label.rho,
        mean,
        std,
        runs: reports.len(),
        digest: first.config_digest.clone(),
        per_run,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::run::{Metric, RunLabel};
    use approx::assert_abs_diff_eq;

    fn report(metric: f64, digest: &str) -> RunReport {
        RunReport {
            run_index: 0,
            seed: 0,
            metric: Metric::Rmse,
            final_test_metric: metric,
            train_curve: vec![metric],
            test_curve: vec![metric],
            loss_curve: vec![metric],
            disturbed_per_epoch: vec![0],
            changed_per_epoch: vec![0],
            wall_time_secs: 0.0,
            config_digest: digest.into(),
            label: RunLabel {
                dataset: "d".into(),
                method: "none".into(),
                alpha: 0.0,
                sigma: 0.01,
                rho: 0.0,
            },
        }
    }

    #[test]
    fn examples() {
        let s = aggregate(&[report(0.5, "x")]).unwrap();
        assert_eq!((s.mean, s.std, s.runs), (0.5, 0.0, 1));

        let s = aggregate(&[report(0.4, "x"), report(0.6, "x")]).unwrap();
        assert_abs_diff_eq!(s.mean, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(s.std, 0.02f64.sqrt(), epsilon = 1e-15);

        let s = aggregate(&[report(0.3, "x"), report(0.3, "x"), report(0.3, "x")]).unwrap();
        assert_eq!(s.std, 0.0);
    }

    #[test]
    fn contract_errors() {
        assert!(matches!(aggregate(&[]), Err(Error::Contract(_))));
        assert!(matches!(
            aggregate(&[report(0.1, "a"), report(0.2, "b")]),
            Err(Error::Contract(_))
        ));
    }
}
