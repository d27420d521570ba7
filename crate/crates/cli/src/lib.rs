//! Library side of the `ssm` command: configuration, the subcommands and
//! the SVG chart writer.

pub mod commands;
pub mod config;
pub mod plot;

pub use commands::{exit_code, ForecastArgs};
pub use config::PipelineConfig;
