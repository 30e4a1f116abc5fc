//! Command-line driver: configuration, sweeps, caching and output files.

pub mod cache;
pub mod commands;
pub mod config;
pub mod error;
pub mod pipeline;
pub mod plots;

pub use config::RunConfig;
pub use error::CliError;
