use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use disturb_cli::{
    cmd_grid, cmd_report, cmd_selftest, cmd_train, parse_config, parse_grid_axis, resolve_format,
    CliResult, GridArgs,
};
use disturb_core::harness::{parse_override, ExperimentConfig, GridOptions, ReportFormat};
use serde_json::Value;

#[derive(Parser)]
#[command(
    name = "disturb",
    version,
    about = "Train dense networks with loss-layer target disturbance"
)]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its summary.
    Train {
        #[command(flatten)]
        common: CommonArgs,
        /// Worker threads for independent runs.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Grid search over configuration keys.
    Grid {
        #[command(flatten)]
        common: CommonArgs,
        /// Axis as `key=v1,v2,...`; repeat for a cartesian product.
        #[arg(long = "grid", required = true)]
        axes: Vec<String>,
        /// Runs per grid point.
        #[arg(long, default_value_t = 5)]
        grid_runs: usize,
        #[arg(long, default_value_t = 256)]
        max_points: usize,
        /// Skip re-running the winner with the configured run count.
        #[arg(long)]
        no_final: bool,
    },
    /// Merge report files into one comparison table.
    Report {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        format: Option<ReportFormat>,
    },
    /// Run the built-in numerical checks.
    Selftest,
}

#[derive(Args)]
struct CommonArgs {
    /// JSON experiment configuration.
    #[arg(short, long)]
    config: PathBuf,
    /// Override a configuration value, `dotted.key=value`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(short, long, default_value = "report.csv")]
    out: PathBuf,
    #[arg(long)]
    format: Option<ReportFormat>,
}

impl CommonArgs {
    fn load(&self) -> CliResult<ExperimentConfig> {
        let mut overrides: Vec<(String, Value)> = self
            .overrides
            .iter()
            .map(|s| parse_override(s))
            .collect::<Result<_, _>>()?;
        if let Some(r) = self.runs {
            overrides.push(("protocol.runs".into(), Value::from(r)));
        }
        if let Some(s) = self.seed {
            overrides.push(("protocol.base_seed".into(), Value::from(s)));
        }
        parse_config(&self.config, &overrides)
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Command::Train { common, jobs } => {
            let cfg = common.load()?;
            let format = resolve_format(common.format, &common.out);
            cmd_train(&cfg, &common.out, format, jobs, &mut out)?;
        }
        Command::Grid {
            common,
            axes,
            grid_runs,
            max_points,
            no_final,
        } => {
            let cfg = common.load()?;
            let args = GridArgs {
                axes: axes
                    .iter()
                    .map(|a| parse_grid_axis(a))
                    .collect::<CliResult<_>>()?,
                options: GridOptions {
                    runs: Some(grid_runs),
                    max_points,
                },
                final_run: !no_final,
            };
            let format = resolve_format(common.format, &common.out);
            cmd_grid(&cfg, &args, &common.out, format, &mut out)?;
        }
        Command::Report {
            inputs,
            out: path,
            format,
        } => {
            let target = path.as_deref().map(|p| (p, resolve_format(format, p)));
            cmd_report(&inputs, target, &mut out)?;
        }
        Command::Selftest => cmd_selftest(&mut out)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn unknown_format_is_rejected_by_parser() {
        assert!(Cli::try_parse_from(["disturb", "report", "a.csv", "--format", "xml"]).is_err());
    }
}
