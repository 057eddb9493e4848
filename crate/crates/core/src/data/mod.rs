//! Datasets, synthetic domain shift, and minibatch sampling.

mod batches;
mod dataset;
mod synth;

pub use batches::{minibatch_iter, EpochSampler, MinibatchStream};
pub use dataset::{Accuracy, Dataset, Domain, EvalScope, LabeledPool, LabeledSample, TargetPool, TargetTruth};
pub use synth::{gen_blobs, gen_two_moons, shift_domain, two_moons_benchmark, Shift};
