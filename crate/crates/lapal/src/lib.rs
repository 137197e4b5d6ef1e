//! File formats, reports and the command line around `lapal-core`.

pub mod binfmt;
pub mod cli;
pub mod error;
pub mod files;
pub mod plot;
pub mod report;
pub mod settings;

pub use error::{CliError, CliResult};
