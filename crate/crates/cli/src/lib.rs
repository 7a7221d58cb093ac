//! Configuration-driven experiment harness for the `chd-core` simulator.
//!
//! A run is described by an INI file with the sections `grid`, `physics`,
//! `initial`, `source`, `stepper`, `run` and `experiment`. [`parse_config`]
//! turns it into a [`RunConfig`] and [`dispatch`] executes it.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod experiments;
pub mod ini;

use std::path::Path;

pub use config::{parse_config, parse_config_with, RunConfig};
pub use error::LabError;
pub use experiments::{dispatch, Outcome};

/// Reads, parses and runs the config at `path`.
pub fn run_file(path: &Path, overrides: &[String]) -> Result<Outcome, LabError> {
    let text = std::fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let cfg = parse_config_with(&text, base, overrides)?;
    dispatch(&cfg)
}
