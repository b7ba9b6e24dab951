//! Manifests, experiment drivers and output writers behind the `adjwalk` binary.

pub mod experiments;
pub mod manifest;
pub mod output;

use std::path::Path;

use thiserror::Error;

use manifest::ExperimentManifest;
use output::Outcome;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage error: {0}")]
    Usage(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("runtime error: {0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io(_) | CliError::Runtime(_) => 3,
        }
    }
}

/// Runs the experiment described by `manifest` and writes its artifacts to `out_dir`.
pub fn run_manifest(manifest: &ExperimentManifest, out_dir: &Path) -> Result<Outcome, CliError> {
    let outcome = experiments::run(manifest)?;
    output::write_outputs(out_dir, manifest, &outcome)?;
    Ok(outcome)
}
