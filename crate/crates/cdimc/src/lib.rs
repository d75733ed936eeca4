//! File formats, configuration, reports and the command-line driver for
//! `cdimc-core`.

pub mod checkpoint;
pub mod config;
pub mod error;
pub mod io;
pub mod report;
pub mod run;

pub use error::{CliError, Result};
