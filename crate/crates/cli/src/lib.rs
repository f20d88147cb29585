//! Batch front end for GAR fitting: `gar simulate | fit | gof | eval`.

pub mod commands;
pub mod config;
pub mod data;
pub mod error;
pub mod report;

pub use config::{Command, RunConfig};
pub use error::{CliError, Result};
