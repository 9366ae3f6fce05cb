//! Command-line front end: simulate a scan, reconstruct it, verify the
//! solver's invariants.

pub mod checks;
pub mod commands;
pub mod config;
pub mod error;
pub mod scenario;

pub use commands::{cmd_reconstruct, cmd_simulate, cmd_verify, ReconstructOptions, VerifyOptions};
pub use config::RunConfig;
pub use error::CliError;
