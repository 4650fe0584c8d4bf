//! Seeded experiment runner: configuration, multi-run training, aggregation,
//! grid search and report files.

mod config;
mod grid;
mod report;
mod run;
mod summary;

pub use config::{
    apply_override, parse_override, parse_override_value, resolve_key, CsvSource, DatasetSource,
    ExperimentConfig, IdxSource, NetworkConfig, ProtocolConfig, SyntheticClassification,
    SyntheticRegression,
};
pub use grid::{grid_search, GridAxis, GridOptions, GridOutcome, GridRow};
pub use report::{comparison_table, emit_report, read_report, render_report, ReportFormat};
pub use run::{
    evaluate, run_experiment, run_experiment_concurrent, run_on, train_run, Metric, RunLabel,
    RunReport,
};
pub use summary::{aggregate, mean_std, Summary};
