//! Experiment runner for the `cpm-core` photodetection models: figure data
//! sets, parallel trajectory ensembles, CSV/JSON output and the acceptance
//! checks behind `cpm validate`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod ensemble;
mod error;
pub mod experiments;
pub mod output;
pub mod validation;

use std::path::Path;

pub use crate::config::{ConfigPatch, ExperimentConfig};
pub use crate::error::{CliError, Result};
pub use crate::output::Dataset;

/// Renders `data` in the configured format and writes it to the configured
/// output (stdout when unset).
pub fn write_dataset(config: &ExperimentConfig, data: &Dataset) -> Result<()> {
    let text = data.render(config)?;
    output::emit(&text, config.out.as_deref())
}

/// Runs the trajectory command; raw events go to `dump` when given.
pub fn cmd_trajectories(config: &ExperimentConfig, dump: Option<&Path>) -> Result<()> {
    let result = experiments::trajectories(config, dump.is_some())?;
    write_dataset(config, &result.data)?;
    if let (Some(path), Some(raw)) = (dump, result.dump) {
        output::emit(&raw, Some(path))?;
    }
    Ok(())
}
