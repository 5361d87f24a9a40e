//! Experiment driver for the `lrtfim` simulator: TOML run configurations,
//! the five experiment pipelines, run manifests with content digests and
//! resumable sweeps over a bounded worker pool.

pub mod config;
pub mod error;
pub mod manifest;
pub mod pool;
pub mod run;
pub mod sweep;

pub use config::{Mode, Overrides, RunConfig};
pub use error::{CliError, CliResult, ErrorKind};
pub use manifest::{Artifact, RunManifest};
pub use run::{deconvolve_samples, run};
pub use sweep::{sweep, SweepReport};
