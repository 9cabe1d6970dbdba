//! Command-line experiments: configuration parsing, execution and output.

pub mod config;
pub mod error;
pub mod runner;

use std::fs;
use std::path::Path;

pub use config::{parse, ExperimentConfig};
pub use error::CliError;
pub use runner::{config_digest, describe, render_csv, run_config, Output};

/// Runs a config and writes its outputs into `out_dir`.
/// Everything is computed before the first file is written.
pub fn run_to_dir(text: &str, out_dir: &Path) -> Result<Vec<Output>, CliError> {
    let outputs = run_config(text)?;
    fs::create_dir_all(out_dir)?;
    for o in &outputs {
        fs::write(out_dir.join(&o.name), &o.contents)?;
    }
    Ok(outputs)
}
