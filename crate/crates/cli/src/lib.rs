//! Configured runs over the fitting, inversion and rendering libraries.

pub mod commands;
pub mod config;
pub mod error;

pub use error::CliError;
