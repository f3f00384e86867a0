//! Library side of the `osbp` command-line tool: config parsing, the train/eval
//! pipeline and the subcommands, kept here so tests can drive them directly.

pub mod commands;
pub mod config;
pub mod exit;
pub mod pipeline;

pub use config::{Loaded, RunConfig};
pub use exit::CliError;
