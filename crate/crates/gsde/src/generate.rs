//! Source/target pairs for the `gen` command.

use gsde_core::data::{gen_blobs, gen_two_moons, shift_domain, Dataset, Domain, Shift};
use gsde_core::rng::derive_seed;

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum DataKind {
    TwoMoons,
    Blobs,
}

/// Generation parameters. `noise` is the within-domain spread (moon noise or
/// blob standard deviation); the remaining fields describe the target shift.
#[derive(Debug, Clone, PartialEq)]
pub struct GenSpec {
    pub kind: DataKind,
    pub n: usize,
    pub noise: f64,
    pub classes: usize,
    pub shift: Shift,
    pub seed: u64,
}

/// `classes` centers evenly spaced on a circle of radius 3.
pub fn blob_centers(classes: usize) -> Vec<Vec<f64>> {
    (0..classes)
        .map(|c| {
            let a = std::f64::consts::TAU * c as f64 / classes as f64;
            vec![3.0 * a.cos(), 3.0 * a.sin()]
        })
        .collect()
}

/// Draws source and target independently, then shifts the target. With a
/// pure rotation on two-moons this matches `two_moons_benchmark`.
pub fn generate(spec: &GenSpec) -> Result<(Dataset, Dataset)> {
    let draw = |seed| -> Result<Dataset> {
        Ok(match spec.kind {
            DataKind::TwoMoons => gen_two_moons(spec.n, spec.noise, seed)?,
            DataKind::Blobs => gen_blobs(spec.n, spec.classes, &blob_centers(spec.classes), spec.noise, seed)?,
        })
    };
    let source = draw(derive_seed(spec.seed, 1))?.renamed("source");
    let target = shift_domain(&draw(derive_seed(spec.seed, 2))?, &spec.shift, derive_seed(spec.seed, 3))?
        .with_domain(Domain::Target)?
        .renamed("target");
    Ok((source, target))
}
