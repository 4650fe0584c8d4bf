//! Command implementations behind the `disturb` binary.
//!
//! Each `cmd_*` function writes human-readable output to the supplied writer
//! and returns an error classified as either a configuration problem or a
//! runtime failure; `main` maps those to exit codes.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use disturb_core::harness::{
    aggregate, apply_override, comparison_table, emit_report, grid_search, parse_override_value,
    read_report, run_experiment, run_experiment_concurrent, DatasetSource, ExperimentConfig,
    GridAxis, GridOptions, ReportFormat, Summary,
};
use disturb_core::selftest;
use serde_json::Value;
use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {}: {source}", .path.display())]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("{}:{line}:{column}: syntax error: {message}", .path.display())]
    Syntax {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("unknown configuration key `{0}`")]
    UnknownKey(String),

    #[error("invalid configuration: {0}")]
    Invalid(String),

    #[error("{0}")]
    Runtime(disturb_core::Error),

    #[error("{0} check(s) failed")]
    ChecksFailed(usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Read { .. }
            | CliError::Syntax { .. }
            | CliError::UnknownKey(_)
            | CliError::Invalid(_) => EXIT_CONFIG,
            CliError::Runtime(_) | CliError::ChecksFailed(_) => EXIT_RUNTIME,
        }
    }
}

impl From<disturb_core::Error> for CliError {
    fn from(e: disturb_core::Error) -> Self {
        match e {
            disturb_core::Error::UnknownKey(k) => CliError::UnknownKey(k),
            e if e.is_config_error() => CliError::Invalid(e.to_string()),
            e => CliError::Runtime(e),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.into())
    }
}

pub type CliResult<T> = Result<T, CliError>;

const TOP_LEVEL_KEYS: [&str; 6] = [
    "name",
    "dataset",
    "network",
    "regularizer",
    "optimizer",
    "protocol",
];

/// Recursively overlays `file` onto `defaults`; every key in `file` must
/// already exist in `defaults`.
fn merge(defaults: &mut Value, file: Value, prefix: &str) -> CliResult<()> {
    match (defaults, file) {
        (Value::Object(base), Value::Object(over)) => {
            for (k, v) in over {
                let path = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                let slot = base.get_mut(&k).ok_or(CliError::UnknownKey(path.clone()))?;
                merge(slot, v, &path)?;
            }
            Ok(())
        }
        (slot, v) => {
            *slot = v;
            Ok(())
        }
    }
}

/// Parses a JSON config, fills task defaults, then applies `key=value`
/// overrides in order.
pub fn parse_config_str(
    text: &str,
    path: &Path,
    overrides: &[(String, Value)],
) -> CliResult<ExperimentConfig> {
    let file: Value = serde_json::from_str(text).map_err(|e| CliError::Syntax {
        path: path.to_path_buf(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let Value::Object(mut sections) = file else {
        return Err(CliError::Invalid("top level must be a JSON object".into()));
    };
    if let Some(k) = sections
        .keys()
        .find(|k| !TOP_LEVEL_KEYS.contains(&k.as_str()))
    {
        return Err(CliError::UnknownKey(k.clone()));
    }
    let dataset_value = sections
        .remove("dataset")
        .ok_or_else(|| CliError::Invalid("missing `dataset` section".into()))?;
    let dataset: DatasetSource = serde_json::from_value(dataset_value).map_err(|e| {
        let msg = e.to_string();
        match msg.strip_prefix("unknown field `") {
            Some(rest) => CliError::UnknownKey(format!(
                "dataset.{}",
                rest.split('`').next().unwrap_or_default()
            )),
            None => CliError::Invalid(format!("dataset: {msg}")),
        }
    })?;
    let mut value = ExperimentConfig::with_defaults(dataset).to_value();
    merge(&mut value, Value::Object(sections), "")?;
    for (k, v) in overrides {
        apply_override(&mut value, k, v.clone())?;
    }
    Ok(ExperimentConfig::from_value(value)?)
}

pub fn parse_config(path: &Path, overrides: &[(String, Value)]) -> CliResult<ExperimentConfig> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config_str(&text, path, overrides)
}

/// `key=v1,v2,...` or `key=[v1, v2]`.
pub fn parse_grid_axis(spec: &str) -> CliResult<GridAxis> {
    let (key, rhs) = spec
        .split_once('=')
        .ok_or_else(|| CliError::Invalid(format!("grid `{spec}` is not of the form key=v1,v2")))?;
    let rhs = rhs.trim();
    let values = if rhs.starts_with('[') {
        match serde_json::from_str::<Value>(rhs) {
            Ok(Value::Array(v)) => v,
            _ => return Err(CliError::Invalid(format!("bad grid list `{rhs}`"))),
        }
    } else {
        rhs.split(',')
            .map(|v| parse_override_value(v.trim()))
            .collect()
    };
    if values.is_empty() {
        return Err(CliError::Invalid(format!("grid `{key}` has no values")));
    }
    Ok(GridAxis::new(key.trim(), values))
}

pub fn format_summary(s: &Summary) -> String {
    format!(
        "{} / {}: {} (runs={}, digest={})",
        s.dataset,
        s.method,
        s.cell(),
        s.runs,
        s.digest
    )
}

pub fn resolve_format(format: Option<ReportFormat>, out: &Path) -> ReportFormat {
    format.unwrap_or_else(|| ReportFormat::from_path(out))
}

/// Trains every run, prints the summary and writes the report file.
pub fn cmd_train(
    cfg: &ExperimentConfig,
    out: &Path,
    format: ReportFormat,
    jobs: usize,
    w: &mut dyn Write,
) -> CliResult<Summary> {
    writeln!(
        w,
        "training {} / {} ({} run(s) x {} epoch(s), digest {})",
        cfg.dataset_name(),
        cfg.method_label(),
        cfg.protocol.runs,
        cfg.protocol.epochs,
        cfg.digest()
    )?;
    let reports = if jobs > 1 {
        run_experiment_concurrent(cfg, jobs)?
    } else {
        run_experiment(cfg)?
    };
    let summary = aggregate(&reports)?;
    writeln!(w, "{}", format_summary(&summary))?;
    emit_report(std::slice::from_ref(&summary), format, out)?;
    writeln!(w, "wrote {}", out.display())?;
    Ok(summary)
}

pub struct GridArgs {
    pub axes: Vec<GridAxis>,
    pub options: GridOptions,
    /// Re-run the winning point with the configured run count.
    pub final_run: bool,
}

/// Grid search; prints the full table and the chosen value per axis.
pub fn cmd_grid(
    cfg: &ExperimentConfig,
    args: &GridArgs,
    out: &Path,
    format: ReportFormat,
    w: &mut dyn Write,
) -> CliResult<Vec<Summary>> {
    writeln!(
        w,
        "grid search over {} (base digest {})",
        args.axes
            .iter()
            .map(|a| a.key.as_str())
            .collect::<Vec<_>>()
            .join(", "),
        cfg.digest()
    )?;
    let outcome = grid_search(cfg, &args.axes, &args.options)?;
    let mut summaries = Vec::with_capacity(outcome.rows.len() + 1);
    for row in &outcome.rows {
        let point = row
            .point
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(" ");
        writeln!(
            w,
            "  {point:<30} {} (runs={}, digest={})",
            row.summary.cell(),
            row.summary.runs,
            row.summary.digest
        )?;
        summaries.push(row.summary.clone());
    }
    for (k, v) in &outcome.best {
        writeln!(w, "best {k} = {v}")?;
    }
    if args.final_run {
        let reports = run_experiment(&outcome.best_config)?;
        let summary = aggregate(&reports)?;
        writeln!(w, "final: {}", format_summary(&summary))?;
        summaries.push(summary);
    }
    emit_report(&summaries, format, out)?;
    writeln!(w, "wrote {}", out.display())?;
    Ok(summaries)
}

/// Merges report files into one comparison table, optionally writing the
/// merged rows.
pub fn cmd_report(
    inputs: &[PathBuf],
    out: Option<(&Path, ReportFormat)>,
    w: &mut dyn Write,
) -> CliResult<Vec<Summary>> {
    if inputs.is_empty() {
        return Err(CliError::Invalid("no report files given".into()));
    }
    let mut all = Vec::new();
    for p in inputs {
        all.extend(read_report(p)?);
    }
    write!(w, "{}", comparison_table(&all))?;
    for s in &all {
        writeln!(w, "  {}", format_summary(s))?;
    }
    if let Some((path, format)) = out {
        emit_report(&all, format, path)?;
        writeln!(w, "wrote {}", path.display())?;
    }
    Ok(all)
}

/// Runs the built-in numerical checks.
pub fn cmd_selftest(w: &mut dyn Write) -> CliResult<()> {
    let checks = selftest::run_all()?;
    let mut failed = 0;
    for c in &checks {
        let tag = if c.passed { "PASS" } else { "FAIL" };
        writeln!(w, "[{tag}] {}: {}", c.name, c.detail)?;
        if !c.passed {
            failed += 1;
        }
    }
    if failed > 0 {
        return Err(CliError::ChecksFailed(failed));
    }
    writeln!(w, "all {} checks passed", checks.len())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    const MINIMAL: &str = r#"{
        "dataset": {"synthetic_regression": {"n": 60, "p": 4, "informative": 2}},
        "regularizer": {"method": "none"}
    }"#;

    fn parse(text: &str, overrides: &[(String, Value)]) -> CliResult<ExperimentConfig> {
        parse_config_str(text, Path::new("cfg.json"), overrides)
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = parse(MINIMAL, &[]).unwrap();
        assert_eq!(cfg.protocol.runs, 20);
        assert_eq!(cfg.network.hidden_dims, vec![64, 64]);
        assert_eq!(cfg.regularizer.sigma, 0.01);
        assert_eq!(cfg.digest(), parse(MINIMAL, &[]).unwrap().digest());
    }

    #[test]
    fn override_beats_file() {
        let text = r#"{
            "dataset": {"synthetic_regression": {}},
            "regularizer": {"method": "disturb_value", "alpha_pct": 20}
        }"#;
        let cfg = parse(text, &[("regularizer.alpha_pct".into(), json!(10))]).unwrap();
        assert_eq!(cfg.regularizer.alpha_pct, 10.0);
    }

    #[test]
    fn error_classes() {
        let syntax = parse("{\n  \"dataset\": ,\n}", &[]).unwrap_err();
        assert!(
            matches!(syntax, CliError::Syntax { line: 2, .. }),
            "{syntax}"
        );
        assert_eq!(syntax.exit_code(), EXIT_CONFIG);

        let unknown = parse(
            r#"{"dataset": {"synthetic_regression": {}}, "regularizer": {"alhpa": 1}}"#,
            &[],
        )
        .unwrap_err();
        assert!(matches!(unknown, CliError::UnknownKey(ref k) if k == "regularizer.alhpa"));

        let top = parse(
            r#"{"dataset": {"synthetic_regression": {}}, "extra": 1}"#,
            &[],
        )
        .unwrap_err();
        assert!(matches!(top, CliError::UnknownKey(_)));

        let ds = parse(r#"{"dataset": {"synthetic_regression": {"m": 1}}}"#, &[]).unwrap_err();
        assert!(
            matches!(ds, CliError::UnknownKey(ref k) if k == "dataset.m"),
            "{ds}"
        );

        let incompatible = parse(
            r#"{"dataset": {"synthetic_regression": {}}, "regularizer": {"method": "disturb_label"}}"#,
            &[],
        )
        .unwrap_err();
        assert!(matches!(incompatible, CliError::Invalid(ref m) if m.contains("incompatible")));

        let bad_override = parse(MINIMAL, &[("protocol.rnus".into(), json!(1))]).unwrap_err();
        assert!(matches!(bad_override, CliError::UnknownKey(_)));
    }

    #[test]
    fn grid_axis_forms() {
        let a = parse_grid_axis("alpha=10,20,50").unwrap();
        assert_eq!(a.key, "alpha");
        assert_eq!(a.values, vec![json!(10), json!(20), json!(50)]);
        let b = parse_grid_axis("network.hidden_dims=[[8],[16,16]]").unwrap();
        assert_eq!(b.values.len(), 2);
        assert!(parse_grid_axis("alpha").is_err());
    }

    #[test]
    fn selftest_passes() {
        let mut out = Vec::new();
        cmd_selftest(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.contains("all 6 checks passed"));
        assert!(!text.contains("FAIL"));
    }
}
