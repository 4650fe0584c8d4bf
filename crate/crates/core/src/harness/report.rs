//! Summary report files (CSV or JSON) and a plain-text comparison table.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::summary::Summary;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
}

impl ReportFormat {
    /// Guesses from the file extension; anything but `.json` is CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => ReportFormat::Json,
            _ => ReportFormat::Csv,
        }
    }
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(Error::Config(format!("unknown report format `{other}`"))),
        }
    }
}

const CSV_HEADER: [&str; 9] = [
    "dataset", "method", "alpha", "sigma", "rho", "mean", "std", "runs", "digest",
];

/// Serializes summaries. Output is a pure function of the input.
pub fn render_report(summaries: &[Summary], format: ReportFormat) -> Result<String> {
    if summaries.is_empty() {
        return Err(Error::Contract("no summaries to report".into()));
    }
    match format {
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(summaries)?;
            s.push('\n');
            Ok(s)
        }
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(CSV_HEADER)?;
            for s in summaries {
                w.write_record([
                    s.dataset.clone(),
                    s.method.clone(),
                    s.alpha.to_string(),
                    s.sigma.to_string(),
                    s.rho.to_string(),
                    s.mean.to_string(),
                    s.std.to_string(),
                    s.runs.to_string(),
                    s.digest.clone(),
                ])?;
            }
            let bytes = w
                .into_inner()
                .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
            Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
        }
    }
}

pub fn emit_report(summaries: &[Summary], format: ReportFormat, path: &Path) -> Result<()> {
    let text = render_report(summaries, format)?;
    fs::write(path, text)?;
    Ok(())
}

/// Reads a report written by [`emit_report`]. CSV reports carry no per-run
/// metrics, so `per_run` comes back empty for them.
pub fn read_report(path: &Path) -> Result<Vec<Summary>> {
    if !path.is_file() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let text = fs::read_to_string(path)?;
    if text.trim_start().starts_with('[') {
        return Ok(serde_json::from_str(&text)?);
    }
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    if header != CSV_HEADER {
        return Err(Error::Config(format!(
            "{} is not a summary report (header {header:?})",
            path.display()
        )));
    }
    let num = |s: &str, what: &str| -> Result<f64> {
        s.parse()
            .map_err(|_| Error::Config(format!("bad {what} value `{s}` in {}", path.display())))
    };
    reader
        .records()
        .map(|rec| {
            let rec = rec?;
            Ok(Summary {
                dataset: rec[0].to_owned(),
                method: rec[1].to_owned(),
                alpha: num(&rec[2], "alpha")?,
                sigma: num(&rec[3], "sigma")?,
                rho: num(&rec[4], "rho")?,
                mean: num(&rec[5], "mean")?,
                std: num(&rec[6], "std")?,
                runs: rec[7]
                    .parse()
                    .map_err(|_| Error::Config(format!("bad runs value `{}`", &rec[7])))?,
                digest: rec[8].to_owned(),
                per_run: Vec::new(),
            })
        })
        .collect()
}

/// Row label: the method name, qualified by its hyperparameters when the same
/// method appears with more than one setting.
fn row_labels(summaries: &[Summary]) -> Vec<String> {
    let mut settings: BTreeMap<&str, Vec<(u64, u64, u64)>> = BTreeMap::new();
    for s in summaries {
        let key = (s.alpha.to_bits(), s.sigma.to_bits(), s.rho.to_bits());
        let seen = settings.entry(s.method.as_str()).or_default();
        if !seen.contains(&key) {
            seen.push(key);
        }
    }
    summaries
        .iter()
        .map(|s| {
            if settings[s.method.as_str()].len() > 1 {
                format!("{} (α={} σ={} ρ={})", s.method, s.alpha, s.sigma, s.rho)
            } else {
                s.method.clone()
            }
        })
        .collect()
}

/// Method-by-dataset table of `mean ± std` cells, rows and columns in first
/// appearance order. A later summary for the same cell replaces an earlier one.
pub fn comparison_table(summaries: &[Summary]) -> String {
    let labels = row_labels(summaries);
    let mut datasets: Vec<&str> = Vec::new();
    let mut methods: Vec<&str> = Vec::new();
    let mut cells: BTreeMap<(&str, &str), String> = BTreeMap::new();
    for (s, label) in summaries.iter().zip(&labels) {
        if !datasets.contains(&s.dataset.as_str()) {
            datasets.push(&s.dataset);
        }
        if !methods.contains(&label.as_str()) {
            methods.push(label);
        }
        cells.insert((label.as_str(), s.dataset.as_str()), s.cell());
    }
    let first_width = methods
        .iter()
        .map(|m| m.chars().count())
        .chain(["method".len()])
        .max()
        .unwrap_or(6);
    let col_width = datasets
        .iter()
        .map(|d| d.chars().count())
        .chain(cells.values().map(|c| c.chars().count()))
        .max()
        .unwrap_or(0);
    let mut out = format!("{:<first_width$}", "method");
    for d in &datasets {
        out.push_str(&format!(" | {d:<col_width$}"));
    }
    out.push('\n');
    out.push_str(&"-".repeat(first_width + datasets.len() * (col_width + 3)));
    out.push('\n');
    for m in &methods {
        out.push_str(&format!("{m:<first_width$}"));
        for d in &datasets {
            let cell = cells.get(&(*m, *d)).map_or("-", String::as_str);
            out.push_str(&format!(" | {cell:<col_width$}"));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn summary(dataset: &str, method: &str, mean: f64) -> Summary {
        Summary {
            dataset: dataset.into(),
            method: method.into(),
            alpha: 10.0,
            sigma: 0.01,
            rho: 0.0,
            mean,
            std: 0.001,
            runs: 20,
            digest: "0123456789abcdef".into(),
            per_run: vec![mean; 2],
        }
    }

    #[test]
    fn one_summary_is_two_csv_lines() {
        let text =
            render_report(&[summary("boston", "dv-gauss", 0.09)], ReportFormat::Csv).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(
            lines[0],
            "dataset,method,alpha,sigma,rho,mean,std,runs,digest"
        );
        assert_eq!(
            lines[1],
            "boston,dv-gauss,10,0.01,0,0.09,0.001,20,0123456789abcdef"
        );
    }

    #[test]
    fn ten_methods_by_eight_datasets() {
        let methods = [
            "none",
            "l2",
            "dropout",
            "dv-gauss",
            "dv-lapl",
            "dv-anneal",
            "de",
            "dv-gauss+dropout",
            "dv-gauss+l2",
            "dv-gauss+de",
        ];
        let datasets = [
            "air", "boston", "bike", "energy", "sklearn", "house", "scond", "crime",
        ];
        let all: Vec<Summary> = datasets
            .iter()
            .flat_map(|d| methods.iter().map(move |m| summary(d, m, 0.1)))
            .collect();
        let text = render_report(&all, ReportFormat::Csv).unwrap();
        assert_eq!(text.lines().count(), 81);
        let table = comparison_table(&all);
        assert_eq!(table.lines().count(), 2 + methods.len());
    }

    #[test]
    fn distinct_settings_get_distinct_rows() {
        let mut a = summary("boston", "dv-gauss", 0.09);
        let mut b = a.clone();
        b.alpha = 50.0;
        let c = summary("boston", "none", 0.1);
        a.mean = 0.08;
        let table = comparison_table(&[a, b, c]);
        assert_eq!(table.lines().count(), 5);
        assert!(table.contains("dv-gauss (α=50 σ=0.01 ρ=0)"));
        assert!(table.lines().any(|l| l.starts_with("none ")));
    }

    #[test]
    fn empty_is_rejected() {
        assert!(render_report(&[], ReportFormat::Json).is_err());
    }

    #[test]
    fn unwritable_path() {
        let err = emit_report(
            &[summary("a", "b", 0.1)],
            ReportFormat::Csv,
            Path::new("/nonexistent-dir/x.csv"),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Io(_)));
    }

    proptest! {
        #[test]
        fn json_round_trip(mean in 0.0f64..1.0, std in 0.0f64..0.1, per in prop::collection::vec(0.0f64..1.0, 1..6)) {
            let mut s = summary("ds", "m", mean);
            s.std = std;
            s.per_run = per;
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("r.json");
            emit_report(std::slice::from_ref(&s), ReportFormat::Json, &path).unwrap();
            prop_assert_eq!(read_report(&path).unwrap(), vec![s.clone()]);

            let csv_path = dir.path().join("r.csv");
            emit_report(std::slice::from_ref(&s), ReportFormat::Csv, &csv_path).unwrap();
            let back = read_report(&csv_path).unwrap();
            prop_assert_eq!(back[0].mean, s.mean);
            prop_assert_eq!(back[0].std, s.std);
        }
    }
}
