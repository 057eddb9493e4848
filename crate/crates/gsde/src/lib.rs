//! File formats, multi-seed experiment execution and the command-line
//! front end for [`gsde_core`].
//!
//! - [`dataset_io`]: dataset CSV files
//! - [`config`]: `key = value` experiment configuration
//! - [`generate`]: synthetic source/target pairs
//! - [`experiment`]: parallel seeds and output files
//! - [`metrics`], [`scores`], [`checkpoint`]: output formats
//! - [`sweep`]: ablation sweeps
//! - [`plotdata`]: long-format figure data

pub mod checkpoint;
pub mod config;
pub mod dataset_io;
mod error;
pub mod experiment;
pub mod generate;
pub mod metrics;
pub mod plotdata;
pub mod scores;
pub mod sweep;

pub use error::{GsdeError, Result};
