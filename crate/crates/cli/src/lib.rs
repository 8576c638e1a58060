//! Library backing the `sffsim` command-line driver. The binary is a thin
//! wrapper so integration tests can drive commands in-process.

pub mod commands;
pub mod config;
pub mod csvio;
pub mod manifest;
pub mod plot;

pub use config::{ModelKind, RunConfig};
