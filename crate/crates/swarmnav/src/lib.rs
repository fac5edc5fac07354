//! File formats, experiment orchestration and the `swarmnav` command line
//! on top of `swarmnav-core`.

pub mod commands;
pub mod error;
pub mod formats;

pub use error::{CliError, Result};
