//! Moving class centroids and the semantic alignment loss.
//!
//! Each class keeps one centroid per domain in bottleneck-feature space. A
//! batch moves the centroid of every class it contains toward the batch mean:
//! `C ← θ·C + (1 - θ)·mean`, or `C ← mean` on first sighting. The semantic loss
//! pulls same-class source/target centroids together (`1 - cos`) and pushes
//! centroids of different classes apart (`cos`). Gradients reach the features
//! only through the batch means of the current step.

use alloc::vec;
use alloc::vec::Vec;

use crate::data::Domain;
use crate::diffcore::{cosine, dot, norm, Matrix};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Source,
    Target,
}

impl From<Domain> for Side {
    fn from(d: Domain) -> Self {
        if d.is_source_stream() {
            Side::Source
        } else {
            Side::Target
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CentroidBank {
    source: Matrix,
    target: Matrix,
    source_init: Vec<bool>,
    target_init: Vec<bool>,
    theta: f64,
}

/// Centroids of one side after a prospective update, with the data needed to
/// pull centroid gradients back onto the batch rows.
#[derive(Debug, Clone)]
pub struct CentroidProposal {
    pub side: Side,
    pub centroids: Matrix,
    pub initialized: Vec<bool>,
    /// `d C_c / d f_i` for a row of class `c`: `(1 - θ) / n_c`, or `1 / n_c` on first sighting.
    row_weight: Vec<f64>,
    row_class: Vec<usize>,
}

impl CentroidProposal {
    /// Gradient w.r.t. the batch features given a gradient w.r.t. the centroids.
    pub fn backprop(&self, d_centroids: &Matrix) -> Result<Matrix> {
        d_centroids.ensure_shape("CentroidProposal::backprop", self.centroids.rows(), self.centroids.cols())?;
        let mut out = Matrix::zeros(self.row_class.len(), self.centroids.cols());
        for (i, &c) in self.row_class.iter().enumerate() {
            let w = self.row_weight[c];
            out.row_mut(i).iter_mut().zip(d_centroids.row(c)).for_each(|(o, g)| *o = w * g);
        }
        Ok(out)
    }
}

impl CentroidBank {
    pub fn new(num_classes: usize, dim: usize, theta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&theta) {
            return Err(crate::error::param_err("centroid momentum must lie in [0, 1]"));
        }
        Ok(Self {
            source: Matrix::zeros(num_classes, dim),
            target: Matrix::zeros(num_classes, dim),
            source_init: vec![false; num_classes],
            target_init: vec![false; num_classes],
            theta,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.source.rows()
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn centroids(&self, side: Side) -> &Matrix {
        match side {
            Side::Source => &self.source,
            Side::Target => &self.target,
        }
    }

    pub fn initialized(&self, side: Side) -> &[bool] {
        match side {
            Side::Source => &self.source_init,
            Side::Target => &self.target_init,
        }
    }

    /// Sets a centroid directly. Mostly useful in tests.
    pub fn set(&mut self, side: Side, class: usize, value: &[f64]) {
        let (m, init) = match side {
            Side::Source => (&mut self.source, &mut self.source_init),
            Side::Target => (&mut self.target, &mut self.target_init),
        };
        m.row_mut(class).copy_from_slice(value);
        init[class] = true;
    }

    /// Computes the moved centroids for a batch without committing them.
    pub fn propose(&self, side: Side, features: &Matrix, labels: &[usize]) -> Result<CentroidProposal> {
        let current = self.centroids(side);
        if features.cols() != current.cols() || features.rows() != labels.len() {
            return Err(Error::Shape {
                op: "update_centroids",
                expected: (labels.len(), current.cols()),
                got: features.shape(),
            });
        }
        let k = current.rows();
        let mut sums = Matrix::zeros(k, current.cols());
        let mut counts = vec![0usize; k];
        for (i, &c) in labels.iter().enumerate() {
            if c >= k {
                return Err(Error::Contract(alloc::format!("class {c} out of range")));
            }
            counts[c] += 1;
            sums.row_mut(c).iter_mut().zip(features.row(i)).for_each(|(s, v)| *s += v);
        }
        let mut centroids = current.clone();
        let mut initialized = self.initialized(side).to_vec();
        let mut row_weight = vec![0.0; k];
        for c in 0..k {
            if counts[c] == 0 {
                continue;
            }
            let n = counts[c] as f64;
            let (keep, take) = if initialized[c] { (self.theta, 1.0 - self.theta) } else { (0.0, 1.0) };
            for (dst, &s) in centroids.row_mut(c).iter_mut().zip(sums.row(c)) {
                *dst = keep * *dst + take * (s / n);
            }
            row_weight[c] = take / n;
            initialized[c] = true;
        }
        Ok(CentroidProposal { side, centroids, initialized, row_weight, row_class: labels.to_vec() })
    }

    pub fn commit(&mut self, proposal: CentroidProposal) {
        match proposal.side {
            Side::Source => {
                self.source = proposal.centroids;
                self.source_init = proposal.initialized;
            }
            Side::Target => {
                self.target = proposal.centroids;
                self.target_init = proposal.initialized;
            }
        }
    }

    /// Moves the centroids of `domain`'s side toward the batch class means.
    ///
    /// `labels` are ground truth (or pseudo-labels) for source-stream rows and
    /// the classifier's current argmax for target rows.
    pub fn update_centroids(&mut self, features: &Matrix, labels: &[usize], domain: Domain) -> Result<()> {
        let p = self.propose(domain.into(), features, labels)?;
        self.commit(p);
        Ok(())
    }
}

/// Semantic loss of the bank's current centroids.
pub fn semantic_loss(bank: &CentroidBank, l_am: f64) -> f64 {
    semantic_loss_grad(
        bank.centroids(Side::Source),
        bank.initialized(Side::Source),
        bank.centroids(Side::Target),
        bank.initialized(Side::Target),
        l_am,
    )
    .0
}

/// `∂ cos(a, b) / ∂ a`, zero when either vector vanishes.
fn cosine_grad(a: &[f64], b: &[f64], out: &mut [f64], scale: f64) {
    let na = norm(a);
    let nb = norm(b);
    if na == 0.0 || nb == 0.0 {
        return;
    }
    let cos = dot(a, b) / (na * nb);
    for ((o, &ai), &bi) in out.iter_mut().zip(a).zip(b) {
        *o += scale * (bi / (na * nb) - cos * ai / (na * na));
    }
}

/// Semantic loss and its gradients w.r.t. source and target centroids.
///
/// ```text
/// Σ_k l_am·(1 - cos(Cs_k, Ct_k))
///   + Σ_k Σ_{j≠k} [cos(Cs_k, Cs_j) + l_am·cos(Cs_k, Ct_j) + l_am·cos(Ct_k, Ct_j)]
/// ```
///
/// Terms involving an uninitialized centroid are skipped.
pub fn semantic_loss_grad(
    source: &Matrix,
    source_init: &[bool],
    target: &Matrix,
    target_init: &[bool],
    l_am: f64,
) -> (f64, Matrix, Matrix) {
    let k = source.rows();
    let mut loss = 0.0;
    let mut d_s = Matrix::zeros(k, source.cols());
    let mut d_t = Matrix::zeros(k, target.cols());
    for c in 0..k {
        if source_init[c] && target_init[c] {
            let (a, b) = (source.row(c), target.row(c));
            loss += l_am * (1.0 - cosine(a, b));
            cosine_grad(a, b, d_s.row_mut(c), -l_am);
            cosine_grad(b, a, d_t.row_mut(c), -l_am);
        }
        for j in (0..k).filter(|&j| j != c) {
            if source_init[c] && source_init[j] {
                let (a, b) = (source.row(c), source.row(j));
                loss += cosine(a, b);
                cosine_grad(a, b, d_s.row_mut(c), 1.0);
                cosine_grad(b, a, d_s.row_mut(j), 1.0);
            }
            if source_init[c] && target_init[j] {
                let (a, b) = (source.row(c), target.row(j));
                loss += l_am * cosine(a, b);
                cosine_grad(a, b, d_s.row_mut(c), l_am);
                cosine_grad(b, a, d_t.row_mut(j), l_am);
            }
            if target_init[c] && target_init[j] {
                let (a, b) = (target.row(c), target.row(j));
                loss += l_am * cosine(a, b);
                cosine_grad(a, b, d_t.row_mut(c), l_am);
                cosine_grad(b, a, d_t.row_mut(j), l_am);
            }
        }
    }
    (loss, d_s, d_t)
}

/// Number of cross-class terms that can contribute; each lies in `[-1, 1]`
/// (times `l_am` where applicable), so `-push_terms` bounds the loss below.
pub fn push_terms(num_classes: usize) -> usize {
    3 * num_classes * num_classes.saturating_sub(1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use rand::Rng;

    #[test]
    fn zero_momentum_tracks_batch_mean() {
        let mut bank = CentroidBank::new(2, 2, 0.0).unwrap();
        bank.set(Side::Source, 0, &[9.0, 9.0]);
        let f = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        bank.update_centroids(&f, &[0, 0], Domain::Source).unwrap();
        assert_eq!(bank.centroids(Side::Source).row(0), &[2.0, 3.0]);
        assert!(!bank.initialized(Side::Source)[1]);
    }

    #[test]
    fn unit_momentum_freezes_after_init() {
        let mut bank = CentroidBank::new(1, 2, 1.0).unwrap();
        let f = Matrix::from_rows(&[[1.0, 2.0]]).unwrap();
        bank.update_centroids(&f, &[0], Domain::Target).unwrap();
        assert_eq!(bank.centroids(Side::Target).row(0), &[1.0, 2.0]);
        bank.update_centroids(&Matrix::from_rows(&[[5.0, 5.0]]).unwrap(), &[0], Domain::Target).unwrap();
        assert_eq!(bank.centroids(Side::Target).row(0), &[1.0, 2.0]);
    }

    #[test]
    fn two_updates_unroll() {
        let theta = 0.7;
        let mut bank = CentroidBank::new(1, 1, theta).unwrap();
        bank.set(Side::Source, 0, &[2.0]);
        // batch means m1 = 4, m2 = -1
        bank.update_centroids(&Matrix::from_rows(&[[3.0], [5.0]]).unwrap(), &[0, 0], Domain::PseudoSource).unwrap();
        bank.update_centroids(&Matrix::from_rows(&[[-1.0]]).unwrap(), &[0], Domain::Source).unwrap();
        let expected = theta * theta * 2.0 + theta * (1.0 - theta) * 4.0 + (1.0 - theta) * -1.0;
        assert!((bank.centroids(Side::Source)[(0, 0)] - expected).abs() < 1e-12);
    }

    #[test]
    fn aligned_and_orthogonal_centroids_cost_nothing() {
        let mut bank = CentroidBank::new(2, 2, 0.7).unwrap();
        bank.set(Side::Source, 0, &[1.0, 0.0]);
        bank.set(Side::Target, 0, &[2.0, 0.0]);
        bank.set(Side::Source, 1, &[0.0, 3.0]);
        bank.set(Side::Target, 1, &[0.0, 1.0]);
        assert!(semantic_loss(&bank, 0.8).abs() < 1e-15);
    }

    #[test]
    fn single_class_has_only_pull_term() {
        let mut bank = CentroidBank::new(1, 2, 0.7).unwrap();
        bank.set(Side::Source, 0, &[1.0, 0.0]);
        bank.set(Side::Target, 0, &[1.0, 1.0]);
        let expected = 0.5 * (1.0 - core::f64::consts::FRAC_1_SQRT_2);
        assert!((semantic_loss(&bank, 0.5) - expected).abs() < 1e-12);
    }

    #[test]
    fn two_class_expansion_matches_hand_terms() {
        let mut rng = seeded(3);
        let mut v = || [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let (s0, s1, t0, t1) = (v(), v(), v(), v());
        let mut bank = CentroidBank::new(2, 3, 0.7).unwrap();
        bank.set(Side::Source, 0, &s0);
        bank.set(Side::Source, 1, &s1);
        bank.set(Side::Target, 0, &t0);
        bank.set(Side::Target, 1, &t1);
        let cos = |a: &[f64], b: &[f64]| {
            let d: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
            let na: f64 = a.iter().map(|x| x * x).sum::<f64>();
            let nb: f64 = b.iter().map(|x| x * x).sum::<f64>();
            d / libm::sqrt(na * nb)
        };
        let l = 0.6;
        let pull = l * (1.0 - cos(&s0, &t0)) + l * (1.0 - cos(&s1, &t1));
        let ss = 2.0 * cos(&s0, &s1);
        let st = l * (cos(&s0, &t1) + cos(&s1, &t0));
        let tt = 2.0 * l * cos(&t0, &t1);
        assert!((semantic_loss(&bank, l) - (pull + ss + st + tt)).abs() < 1e-12);
    }

    #[test]
    fn uninitialized_classes_are_skipped() {
        let mut bank = CentroidBank::new(3, 2, 0.7).unwrap();
        bank.set(Side::Source, 0, &[1.0, 0.0]);
        bank.set(Side::Source, 1, &[1.0, 0.0]);
        // only the source-source push between classes 0 and 1, counted both ways
        assert!((semantic_loss(&bank, 0.9) - 2.0).abs() < 1e-12);
        assert!(semantic_loss(&bank, 0.9) >= -(push_terms(3) as f64));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = seeded(11);
        let mut s = Matrix::zeros(3, 4);
        let mut t = Matrix::zeros(3, 4);
        for v in s.as_mut_slice().iter_mut().chain(t.as_mut_slice()) {
            *v = rng.random_range(-1.0..1.0);
        }
        let si = [true, true, false];
        let ti = [true, false, true];
        let (_, ds, dt) = semantic_loss_grad(&s, &si, &t, &ti, 0.7);
        let h = 1e-6;
        for idx in 0..12 {
            for (which, grad) in [(0, &ds), (1, &dt)] {
                let eval = |delta: f64| {
                    let (mut s2, mut t2) = (s.clone(), t.clone());
                    if which == 0 {
                        s2.as_mut_slice()[idx] += delta;
                    } else {
                        t2.as_mut_slice()[idx] += delta;
                    }
                    semantic_loss_grad(&s2, &si, &t2, &ti, 0.7).0
                };
                let fd = (eval(h) - eval(-h)) / (2.0 * h);
                assert!((fd - grad.as_slice()[idx]).abs() < 1e-7, "{fd} vs {}", grad.as_slice()[idx]);
            }
        }
    }
}
