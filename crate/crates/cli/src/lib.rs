//! Command-line front end for flexibility-region analyses: scenario
//! configuration, batch sweeps over durations, days and heat-pump
//! penetration, capacity identification, and deterministic SVG plots.

pub mod analysis;
pub mod app;
pub mod config;
pub mod error;
pub mod inputs;
pub mod svg;

pub use app::{main_with, Cli, Command};
pub use config::{AnalysisKind, ScenarioConfig};
pub use error::CliError;
