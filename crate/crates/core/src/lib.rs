//! Core of a cardinality-estimation workbench.
//!
//! Everything in this crate is `no_std` + `alloc`: coarse column statistics,
//! the supported SQL subset, exact (ground-truth) counting, classical baseline
//! estimators, bootstrap-confidence selection, structured prompts, a small
//! digit-sequence language model trained by maximum likelihood, the
//! self-correction controller, cost-based routing, deterministic workload
//! generators and Q-error metrics.
//!
//! File formats, the HTTP backend and the command line live in the `cardest`
//! companion crate.
#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod bench;
pub mod catalog;
pub mod datagen;
pub mod ensemble;
pub mod error;
pub mod estimators;
pub mod exec;
pub mod inference;
pub mod metrics;
pub mod numlm;
pub mod prompt;
pub mod sql;
pub mod value;
pub mod workloads;

pub use catalog::{Catalog, Column, ColumnStats, JoinEdge, TableData};
pub use error::{Error, Result};
pub use estimators::{Estimate, EstimateSource};

pub use sql::{QueryAst, WriteOp};
pub use value::{ColumnType, Value};
