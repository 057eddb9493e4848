//! Gradual source domain expansion (GSDE) for unsupervised domain adaptation.
//!
//! A small classifier is trained `N` times from scratch. Before run `n` the
//! labeled source set is expanded with the `(n - 1) / N` highest scoring
//! target samples of run `n - 1`, relabeled with their pseudo-labels. Each run
//! optimizes the sum of a classification loss, a conditional adversarial loss,
//! a moving-centroid semantic loss and a MixMatch consistency loss.
//!
//! The crate is `no_std` (with `alloc`) and carries no IO. File formats, the
//! experiment runner and the command-line interface live in the `gsde` crate.
//!
//! Layout:
//!
//! - [`diffcore`]: dense matrices, linear layers with explicit backward passes, SGD.
//! - [`data`]: synthetic domain-shift datasets, label-withholding views, minibatches.
//! - [`model`]: extractor, parallel bottlenecks, classifier, discriminator, gradient reversal.
//! - [`losses`]: the four training losses and the moving centroid bank.
//! - [`scoring`]: neighborhood aggregation, label propagation, top-fraction selection.
//! - [`driver`]: the outer loop over runs plus the ablation switches.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod data;
pub mod diffcore;
pub mod driver;
mod error;
pub mod losses;
mod math;
pub mod model;
pub mod rng;
pub mod scoring;

pub use error::{Error, Result};
