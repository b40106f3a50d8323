//! Command-line driver for `tvflow-core`: key-value run configurations, the
//! raw field and PGM formats, CSV reports, and the `solve`, `verify`,
//! `denoise`, `sweep` and `study` commands.

pub mod commands;
pub mod config;
mod error;
pub mod fieldio;
pub mod pgm;
pub mod report;
pub mod setup;

pub use error::{CliError, CliResult};
