//! Configuration-driven runner for the virtual-ensemble propagator.
//!
//! A run reads a `key = value` file, propagates the requested experiment and
//! writes CSV tables plus a JSON sidecar with the resolved settings.

pub mod config;
pub mod error;
pub mod run;

pub use config::{parse_config, Experiment, RunConfig};
pub use error::CliError;
pub use run::{run, Outcome};
