//! Command-line front end for the dfq protocol simulator: protocol runs,
//! attack sweeps, circuit histogram reproduction and efficiency accounting.

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;

pub use commands::{cmd_attack_sweep, cmd_efficiency, cmd_repro_figures, cmd_run, SCHEMA_VERSION};
pub use config::{RunConfigFile, SecretsMode};
pub use error::{CliError, CliResult, EXIT_CONFIG, EXIT_IO, EXIT_OK};
