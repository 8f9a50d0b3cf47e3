//! File formats, configuration and experiment commands for `openset-core`.
//!
//! - [`csv_io`]: feature CSV reader/writer.
//! - [`checkpoint`]: JSON model checkpoints with optimizer state.
//! - [`config`]: TOML experiment configuration.
//! - [`report`]: metric report JSON and CSV tables.
//! - [`experiment`]: the `gen-data`, `train`, `eval`, `sweep-lambda` and
//!   `curves` commands as library functions.

pub mod checkpoint;
pub mod config;
pub mod csv_io;
mod error;
pub mod experiment;
pub mod report;

pub use error::{Error, Result};
