//! MixMatch at tabular scale.
//!
//! 1. Jitter every labeled row once and every unlabeled row `num_augment`
//!    times with Gaussian feature noise.
//! 2. Guess a label for each unlabeled row: the mean class distribution over
//!    its augmentations, then sharpened with temperature `T`.
//! 3. Shuffle the union of both pools and MixUp each labeled and unlabeled
//!    row with one partner, `λ' = max(λ, 1 - λ)` with `λ ~ Beta(α, α)`.
//! 4. Loss: cross-entropy on the mixed labeled rows plus `unlabeled_weight`
//!    times the mean squared error on the mixed unlabeled rows.
//!
//! Guessed labels and mixing coefficients are constants for the gradient:
//! [`plan_mixmatch`] fixes them, [`mixmatch_terms`] differentiates the rest.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Beta, Distribution, Normal};

use crate::diffcore::ops::{cross_entropy, cross_entropy_logit_grad, one_hot_checked, softmax_backward};
use crate::diffcore::Matrix;
use crate::math::pow;
use crate::model::GsdeModel;
use crate::rng::seeded;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixMatchConfig {
    pub num_augment: usize,
    pub temperature: f64,
    pub mixup_alpha: f64,
    pub unlabeled_weight: f64,
    pub augment_noise_sd: f64,
}

impl Default for MixMatchConfig {
    fn default() -> Self {
        Self { num_augment: 2, temperature: 0.5, mixup_alpha: 0.75, unlabeled_weight: 1.0, augment_noise_sd: 0.1 }
    }
}

impl MixMatchConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.temperature > 0.0) || !(self.mixup_alpha > 0.0) || self.num_augment == 0 || !(self.augment_noise_sd >= 0.0) {
            return Err(crate::error::param_err("MixMatch needs T > 0, alpha > 0, num_augment >= 1, noise >= 0"));
        }
        Ok(())
    }
}

/// `q_c^{1/T} / Σ_j q_j^{1/T}`
pub fn sharpen(q: &[f64], temperature: f64) -> Vec<f64> {
    let powered: Vec<f64> = q.iter().map(|&v| pow(v.max(0.0), 1.0 / temperature)).collect();
    let sum: f64 = powered.iter().sum();
    if sum == 0.0 {
        return alloc::vec![1.0 / q.len() as f64; q.len()];
    }
    powered.into_iter().map(|v| v / sum).collect()
}

/// `λ·a + (1 - λ)·b`
pub fn mixup(a: &[f64], b: &[f64], lambda: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| lambda * x + (1.0 - lambda) * y).collect()
}

/// Everything that is held constant while differentiating the MixMatch loss.
#[derive(Debug, Clone, PartialEq)]
pub struct MixMatchPlan {
    pub labeled_x: Matrix,
    pub labeled_targets: Matrix,
    pub unlabeled_x: Matrix,
    pub unlabeled_targets: Matrix,
    /// Mixing coefficient per output row, labeled rows first. Each is `>= 0.5`.
    pub lambdas: Vec<f64>,
}

fn jitter<R: Rng>(x: &Matrix, noise: &Normal<f64>, rng: &mut R) -> Matrix {
    let mut out = x.clone();
    for v in out.as_mut_slice() {
        *v += noise.sample(rng);
    }
    out
}

/// Augments, guesses, sharpens, and mixes. `labeled_targets` are one-hot (or
/// soft) rows; either pool may be empty.
pub fn plan_mixmatch<R: Rng>(
    model: &GsdeModel,
    cfg: &MixMatchConfig,
    labeled_x: &Matrix,
    labeled_targets: &Matrix,
    unlabeled_x: &Matrix,
    rng: &mut R,
) -> Result<MixMatchPlan> {
    cfg.validate()?;
    let k = model.dims().classes;
    labeled_targets.ensure_shape("plan_mixmatch", labeled_x.rows(), k)?;
    let noise = Normal::new(0.0, cfg.augment_noise_sd).expect("validated noise");
    let beta = Beta::new(cfg.mixup_alpha, cfg.mixup_alpha).expect("validated alpha");

    let aug_labeled = jitter(labeled_x, &noise, rng);
    let mut aug_unlabeled = Vec::with_capacity(cfg.num_augment);
    let mut guess = Matrix::zeros(unlabeled_x.rows(), k);
    for _ in 0..cfg.num_augment {
        let aug = jitter(unlabeled_x, &noise, rng);
        if aug.rows() > 0 {
            guess.add_assign(&model.predict_probs(&aug)?)?;
        }
        aug_unlabeled.push(aug);
    }
    guess.scale(1.0 / cfg.num_augment as f64);
    for i in 0..guess.rows() {
        let sharp = sharpen(guess.row(i), cfg.temperature);
        guess.row_mut(i).copy_from_slice(&sharp);
    }
    let u_refs: Vec<&Matrix> = aug_unlabeled.iter().collect();
    let u_x = Matrix::vstack(&u_refs)?;
    let u_targets = {
        let reps: Vec<&Matrix> = (0..cfg.num_augment).map(|_| &guess).collect();
        Matrix::vstack(&reps)?
    };

    let all_x = Matrix::vstack(&[&aug_labeled, &u_x])?;
    let all_t = Matrix::vstack(&[labeled_targets, &u_targets])?;
    let mut partner: Vec<usize> = (0..all_x.rows()).collect();
    partner.shuffle(rng);

    let n = all_x.rows();
    let cols = all_x.cols();
    let mut mixed_x = Matrix::zeros(n, cols);
    let mut mixed_t = Matrix::zeros(n, k);
    let mut lambdas = Vec::with_capacity(n);
    for i in 0..n {
        let l: f64 = beta.sample(rng);
        let l = l.max(1.0 - l);
        let j = partner[i];
        mixed_x.row_mut(i).copy_from_slice(&mixup(all_x.row(i), all_x.row(j), l));
        mixed_t.row_mut(i).copy_from_slice(&mixup(all_t.row(i), all_t.row(j), l));
        lambdas.push(l);
    }
    let nl = labeled_x.rows();
    Ok(MixMatchPlan {
        labeled_x: mixed_x.slice_rows(0, nl),
        labeled_targets: mixed_t.slice_rows(0, nl),
        unlabeled_x: mixed_x.slice_rows(nl, n),
        unlabeled_targets: mixed_t.slice_rows(nl, n),
        lambdas,
    })
}

/// Loss for the model's predictions on a plan's mixed rows, with gradients
/// w.r.t. the logits of the labeled and unlabeled rows.
pub fn mixmatch_terms(
    cfg: &MixMatchConfig,
    plan: &MixMatchPlan,
    probs_labeled: &Matrix,
    probs_unlabeled: &Matrix,
) -> Result<(f64, Matrix, Matrix)> {
    let k = plan.labeled_targets.cols();
    let (lx, d_l) = if plan.labeled_x.rows() > 0 {
        (
            cross_entropy(probs_labeled, &plan.labeled_targets)?,
            cross_entropy_logit_grad(probs_labeled, &plan.labeled_targets)?,
        )
    } else {
        (0.0, Matrix::zeros(0, k))
    };
    let nu = probs_unlabeled.rows();
    plan.unlabeled_targets.ensure_shape("mixmatch_terms", nu, probs_unlabeled.cols())?;
    let (lu, d_u) = if nu > 0 {
        let denom = (nu * k) as f64;
        let mut diff = probs_unlabeled.clone();
        diff.axpy(-1.0, &plan.unlabeled_targets)?;
        let lu = diff.as_slice().iter().map(|v| v * v).sum::<f64>() / denom;
        diff.scale(2.0 * cfg.unlabeled_weight / denom);
        (lu, softmax_backward(probs_unlabeled, &diff)?)
    } else {
        (0.0, Matrix::zeros(0, k))
    };
    Ok((lx + cfg.unlabeled_weight * lu, d_l, d_u))
}

/// MixMatch loss value for a labeled and an unlabeled batch.
pub fn mixmatch_loss(
    model: &GsdeModel,
    cfg: &MixMatchConfig,
    labeled_x: &Matrix,
    labels: &[usize],
    unlabeled_x: &Matrix,
    seed: u64,
) -> Result<f64> {
    let targets = one_hot_checked(labels, model.dims().classes)?;
    let plan = plan_mixmatch(model, cfg, labeled_x, &targets, unlabeled_x, &mut seeded(seed))?;
    let pl = model.predict_probs(&plan.labeled_x)?;
    let pu = model.predict_probs(&plan.unlabeled_x)?;
    Ok(mixmatch_terms(cfg, &plan, &pl, &pu)?.0)
}
