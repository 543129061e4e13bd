//! Command-line front end for the `hamhopf` library.

pub mod config;
pub mod run;

pub use config::{parse_config, ConfigError, RunConfig};
pub use run::{execute, Outcome, Overrides, Report, Status, Subcommand};
