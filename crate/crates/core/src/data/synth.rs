//! Synthetic domain-shift benchmarks.

use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};

use super::{Dataset, Domain, LabeledSample};
use crate::math::sin_cos;
use crate::rng::{derive_seed, seeded, GsdeRng};
use crate::{Error, Result};

fn gaussian(sd: f64) -> Normal<f64> {
    Normal::new(0.0, sd).expect("finite non-negative sd")
}

/// Two interleaving half circles of radius one.
///
/// Class 0 lies on `(cos t, sin t)`, class 1 on `(1 - cos t, 0.5 - sin t)`,
/// with `t` evenly spaced in `[0, π]`. Isotropic Gaussian noise of standard
/// deviation `noise_sd` is added and the rows are shuffled.
pub fn gen_two_moons(n: usize, noise_sd: f64, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    if !(noise_sd >= 0.0) || !noise_sd.is_finite() {
        return Err(crate::error::param_err("noise_sd must be finite and >= 0"));
    }
    let n_outer = n / 2;
    let n_inner = n - n_outer;
    let mut rng = seeded(derive_seed(seed, 0x6d6f_6f6e));
    let noise = gaussian(noise_sd);
    let mut samples = Vec::with_capacity(n);
    let arc = |count: usize, i: usize| {
        if count <= 1 {
            0.0
        } else {
            core::f64::consts::PI * i as f64 / (count - 1) as f64
        }
    };
    for i in 0..n_outer {
        let (s, c) = sin_cos(arc(n_outer, i));
        samples.push(moon_point([c, s], 0, &noise, &mut rng));
    }
    for i in 0..n_inner {
        let (s, c) = sin_cos(arc(n_inner, i));
        samples.push(moon_point([1.0 - c, 0.5 - s], 1, &noise, &mut rng));
    }
    samples.shuffle(&mut rng);
    Dataset::new("two-moons", 2, 2, samples)
}

fn moon_point(p: [f64; 2], label: usize, noise: &Normal<f64>, rng: &mut GsdeRng) -> LabeledSample {
    let features = p.iter().map(|&v| v + noise.sample(rng)).collect();
    LabeledSample { features, label: Some(label), domain: Domain::Source }
}

/// Isotropic Gaussian clusters, one per class, with balanced class counts
/// (the first `n % num_classes` classes get one extra sample).
pub fn gen_blobs(n: usize, num_classes: usize, centers: &[Vec<f64>], spread: f64, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    if centers.len() != num_classes || num_classes == 0 {
        return Err(crate::error::param_err(format!(
            "{} centers given for {num_classes} classes",
            centers.len()
        )));
    }
    if !(spread >= 0.0) || !spread.is_finite() {
        return Err(crate::error::param_err("spread must be finite and >= 0"));
    }
    let dim = centers[0].len();
    if dim == 0 || centers.iter().any(|c| c.len() != dim) {
        return Err(crate::error::param_err("centers must share a positive dimension"));
    }
    let mut rng = seeded(derive_seed(seed, 0x626c_6f62));
    let noise = gaussian(spread);
    let mut samples = Vec::with_capacity(n);
    for (class, center) in centers.iter().enumerate() {
        let count = n / num_classes + usize::from(class < n % num_classes);
        for _ in 0..count {
            let features = center.iter().map(|&c| c + noise.sample(&mut rng)).collect();
            samples.push(LabeledSample { features, label: Some(class), domain: Domain::Source });
        }
    }
    samples.shuffle(&mut rng);
    Dataset::new("blobs", num_classes, dim, samples)
}

/// Parameters of [`shift_domain`]: `x ← scale·R(rotation)·x + translation + noise`.
#[derive(Debug, Clone, PartialEq)]
pub struct Shift {
    pub rotation_deg: f64,
    pub translation: Vec<f64>,
    pub scale: f64,
    pub noise_sd: f64,
}

impl Shift {
    pub fn identity(dim: usize) -> Self {
        Self { rotation_deg: 0.0, translation: alloc::vec![0.0; dim], scale: 1.0, noise_sd: 0.0 }
    }

    pub fn rotation(rotation_deg: f64, dim: usize) -> Self {
        Self { rotation_deg, ..Self::identity(dim) }
    }
}

/// Applies a covariate shift to every sample. Rotation about the origin is
/// only defined for 2-D data; other dimensions accept `rotation_deg == 0`.
pub fn shift_domain(d: &Dataset, shift: &Shift, seed: u64) -> Result<Dataset> {
    if !(shift.scale > 0.0) {
        return Err(crate::error::param_err("scale must be > 0"));
    }
    if !(shift.noise_sd >= 0.0) {
        return Err(crate::error::param_err("noise_sd must be >= 0"));
    }
    if shift.translation.len() != d.feature_dim {
        return Err(Error::Shape {
            op: "shift_domain",
            expected: (1, d.feature_dim),
            got: (1, shift.translation.len()),
        });
    }
    if shift.rotation_deg != 0.0 && d.feature_dim != 2 {
        return Err(Error::Unsupported(format!(
            "rotation needs 2-D features, dataset has {}",
            d.feature_dim
        )));
    }
    let (sin, cos) = sin_cos(shift.rotation_deg.to_radians());
    let mut rng = seeded(derive_seed(seed, 0x7368_6966));
    let noise = gaussian(shift.noise_sd);
    let samples = d
        .samples()
        .iter()
        .map(|s| {
            let mut x = s.features.clone();
            if d.feature_dim == 2 {
                let (a, b) = (x[0], x[1]);
                x[0] = cos * a - sin * b;
                x[1] = sin * a + cos * b;
            }
            for (v, t) in x.iter_mut().zip(&shift.translation) {
                *v = shift.scale * *v + t;
                if shift.noise_sd > 0.0 {
                    *v += noise.sample(&mut rng);
                }
            }
            LabeledSample { features: x, ..s.clone() }
        })
        .collect();
    Dataset::new(d.name.clone(), d.num_classes, d.feature_dim, samples)
}

/// A source/target pair for the reference two-moons benchmark: both domains
/// are drawn with `noise_sd`, the target from an independent seed and then
/// rotated by `rotation_deg` about the origin. Target rows are tagged
/// `Target` and keep their labels as evaluation ground truth.
pub fn two_moons_benchmark(n_per_domain: usize, noise_sd: f64, rotation_deg: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    let source = gen_two_moons(n_per_domain, noise_sd, derive_seed(seed, 1))?.renamed("two-moons-source");
    let target = gen_two_moons(n_per_domain, noise_sd, derive_seed(seed, 2))?;
    let target = shift_domain(&target, &Shift::rotation(rotation_deg, 2), derive_seed(seed, 3))?
        .with_domain(Domain::Target)?
        .renamed("two-moons-target");
    Ok((source, target))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn noiseless_moons_lie_on_arcs() {
        let d = gen_two_moons(4, 0.0, 9).unwrap();
        assert_eq!(d.len(), 4);
        for s in d.samples() {
            let (x, y) = (s.features[0], s.features[1]);
            let r = match s.label {
                Some(0) => (x * x + y * y).sqrt(),
                Some(1) => ((x - 1.0).powi(2) + (y - 0.5).powi(2)).sqrt(),
                _ => unreachable!(),
            };
            assert!((r - 1.0).abs() < 1e-12);
            if s.label == Some(0) {
                assert!(y >= -1e-12);
            } else {
                assert!(y <= 0.5 + 1e-12);
            }
        }
    }

    #[test]
    fn moons_are_balanced_and_deterministic() {
        let a = gen_two_moons(101, 0.1, 3).unwrap();
        let b = gen_two_moons(101, 0.1, 3).unwrap();
        assert_eq!(a, b);
        let ones = a.samples().iter().filter(|s| s.label == Some(1)).count();
        assert!((ones as i64 - (101 - ones) as i64).abs() <= 1);
        assert_ne!(a, gen_two_moons(101, 0.1, 4).unwrap());
        assert_eq!(gen_two_moons(0, 0.1, 3), Err(Error::EmptyDataset));
    }

    #[test]
    fn zero_spread_blobs_sit_on_centers() {
        let centers = vec![vec![0.0, 0.0], vec![5.0, 5.0], vec![-5.0, 5.0]];
        let d = gen_blobs(10, 3, &centers, 0.0, 1).unwrap();
        let mut counts = [0usize; 3];
        for s in d.samples() {
            let c = s.label.unwrap();
            counts[c] += 1;
            assert_eq!(s.features, centers[c]);
        }
        assert_eq!(counts, [4, 3, 3]);
        assert!(gen_blobs(10, 3, &centers, -1.0, 1).is_err());
        assert!(gen_blobs(10, 2, &centers, 1.0, 1).is_err());
    }

    #[test]
    fn separated_blobs_classify_by_nearest_center() {
        let centers = vec![vec![-4.0, 0.0], vec![4.0, 0.0]];
        let d = gen_blobs(200, 2, &centers, 0.5, 8).unwrap();
        for s in d.samples() {
            let nearest = if s.features[0] < 0.0 { 0 } else { 1 };
            assert_eq!(Some(nearest), s.label);
        }
    }

    #[test]
    fn identity_and_periodic_shifts() {
        let d = gen_two_moons(50, 0.1, 2).unwrap();
        assert_eq!(shift_domain(&d, &Shift::identity(2), 0).unwrap(), d);
        let full = shift_domain(&d, &Shift::rotation(360.0, 2), 0).unwrap();
        for (a, b) in full.samples().iter().zip(d.samples()) {
            assert_eq!(a.label, b.label);
            for (x, y) in a.features.iter().zip(&b.features) {
                assert!((x - y).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn half_turn_maps_unit_x_to_minus_x() {
        let d = Dataset::new(
            "p",
            1,
            2,
            vec![LabeledSample { features: vec![1.0, 0.0], label: Some(0), domain: Domain::Source }],
        )
        .unwrap();
        let r = shift_domain(&d, &Shift::rotation(180.0, 2), 0).unwrap();
        assert!((r.samples()[0].features[0] + 1.0).abs() < 1e-12);
        assert!(r.samples()[0].features[1].abs() < 1e-12);
    }

    #[test]
    fn rotation_requires_2d() {
        let centers = vec![vec![0.0, 0.0, 0.0]];
        let d = gen_blobs(4, 1, &centers, 1.0, 0).unwrap();
        assert!(matches!(
            shift_domain(&d, &Shift::rotation(10.0, 3), 0),
            Err(Error::Unsupported(_))
        ));
        assert!(shift_domain(&d, &Shift { scale: 0.0, ..Shift::identity(3) }, 0).is_err());
    }

    #[test]
    fn benchmark_target_is_tagged_target() {
        let (s, t) = two_moons_benchmark(20, 0.1, 30.0, 5).unwrap();
        assert!(s.samples().iter().all(|x| x.domain == Domain::Source));
        assert!(t.samples().iter().all(|x| x.domain == Domain::Target && x.label.is_some()));
    }
}
