//! IO, file formats and the command-line front end for the interest
//! detection and re-ranking pipeline. All numeric work lives in
//! `klboost-core`; this crate adds the catalog/events/threshold/report
//! file formats and the five subcommands.

pub mod commands;
pub mod config;
pub mod formats;

pub use commands::CliError;
pub use config::Config;
