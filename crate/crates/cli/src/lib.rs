//! Library side of the `crowdbench` command: config handling, input loading, report writing
//! and the five subcommands.

pub mod commands;
pub mod config;
pub mod error;
pub mod inputs;
pub mod report;
pub mod svg;

use std::path::Path;

pub use commands::{AdoptionInput, Command, Outcome};
pub use config::{Overrides, RunConfig};
pub use error::CliError;

/// Loads `config` (or defaults when absent), applies overrides and runs `command`.
pub fn execute(
    command: Command,
    config: Option<&Path>,
    overrides: &Overrides,
    adoption: &AdoptionInput,
) -> Result<Outcome, CliError> {
    let mut cfg = match config {
        Some(path) => RunConfig::load(path)?,
        None if command == Command::Adoption => RunConfig::default(),
        None => return Err(CliError::validation("--config is required")),
    };
    cfg.apply(overrides);
    commands::run(command, &cfg, adoption)
}
