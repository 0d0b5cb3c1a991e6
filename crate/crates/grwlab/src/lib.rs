//! Command-line driver and file formats for `grwlab-core`: QSL1 snapshots,
//! bound tables, TOML run configs, CSV/JSON outputs and a rayon executor.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod cli;
pub mod config;
pub mod error;
pub mod exec;
pub mod output;
pub mod snapshot;

pub use error::{IoError, Result};
