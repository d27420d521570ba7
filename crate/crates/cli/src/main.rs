use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use ssm_cli::commands::{cmd_filter, cmd_forecast, cmd_ingest, cmd_report};
use ssm_cli::{exit_code, ForecastArgs, PipelineConfig};

#[derive(Parser)]
#[command(name = "ssm", version, about = "Forecast daily case curves from converged-country cohorts")]
struct Cli {
    /// JSON pipeline configuration (falls back to $SSM_CONFIG).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse, repair and rewrite a snapshot in canonical form.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// List the converged countries selected by a filter.
    Filter {
        #[arg(long)]
        snapshot: PathBuf,
        /// 1, 2, 3 or a filter JSON file.
        #[arg(long)]
        filter: String,
        /// Also write the listing to this CSV file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Forecast a target country's daily cases per filter and on average.
    Forecast {
        #[arg(long)]
        snapshot: PathBuf,
        #[arg(long)]
        target: String,
        #[arg(long, value_delimiter = ',')]
        filters: Option<Vec<String>>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        plot: Option<PathBuf>,
        /// JSON summary of the per-filter and averaged forecasts.
        #[arg(long)]
        summary: Option<PathBuf>,
        /// JSON dump of calibrations, regressions and SARIMAX fits.
        #[arg(long)]
        dump_fit: Option<PathBuf>,
    },
    /// Per-filter regression quality and forecast statistics for a target.
    Report {
        #[arg(long)]
        snapshot: PathBuf,
        #[arg(long, value_delimiter = ',')]
        filters: Option<Vec<String>>,
        #[arg(long)]
        target: String,
    },
}

fn run(cli: Cli) -> Result<()> {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Command::Ingest { input, out: path } => cmd_ingest(&input, &path, &mut out)?,
        Command::Filter { snapshot, filter, out: path } => {
            let config = PipelineConfig::resolve(cli.config.as_deref())?;
            cmd_filter(&snapshot, &filter, path.as_deref(), &config, &mut out)?;
        }
        Command::Forecast {
            snapshot,
            target,
            filters,
            out: path,
            plot,
            summary,
            dump_fit,
        } => {
            let config = PipelineConfig::resolve(cli.config.as_deref())?;
            let args = ForecastArgs {
                snapshot,
                target,
                filters,
                out: path,
                plot,
                summary,
                dump_fit,
            };
            cmd_forecast(&args, &config, &mut out)?;
        }
        Command::Report {
            snapshot,
            filters,
            target,
        } => {
            let config = PipelineConfig::resolve(cli.config.as_deref())?;
            cmd_report(&snapshot, filters.as_deref(), &target, &config, &mut out)?;
        }
    }
    out.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err) as u8)
        }
    }
}
