//! Command-line pipeline for neural state-space identification with
//! uncertainty quantification.
//!
//! `generate -> train -> laplace -> evaluate -> report`, driven by one TOML
//! configuration. Every artifact records the configuration hash, the seed and
//! the hashes of the upstream files it was built from; stale inputs are refused.

pub mod artifacts;
pub mod config;
pub mod error;
pub mod exec;
pub mod io;
pub mod pipeline;

pub use config::ExperimentConfig;
pub use error::{CliError, CliResult};
