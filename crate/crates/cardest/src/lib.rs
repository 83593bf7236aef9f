//! File formats, CSV ingestion, the HTTP chat backend, training helpers
//! and the command line of the cardest workbench. Algorithms live in
//! `cardest-core`.

pub mod cli;
pub mod commands;
pub mod error;
pub mod formats;
pub mod ingest;
pub mod pipeline;
pub mod remote;
pub mod report;
pub mod training;

pub use error::{CliError, CliResult};
