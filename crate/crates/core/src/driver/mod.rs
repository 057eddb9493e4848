//! Outer GSDE loop.
//!
//! Run `n` of `N` trains a freshly initialized model on the source set
//! expanded with the `floor((n - 1) / N · n_t)` most confident targets of
//! run `n - 1`. The target set itself is never reduced.

mod config;
mod run;

pub use config::{Ablation, ExperimentConfig};
pub use run::{expand_source, run_gsde, train_single_run, Experiment, ExtraLabels, RunRecord, TracePoint};
