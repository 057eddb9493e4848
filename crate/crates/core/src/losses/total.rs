//! One optimization step of `L = L_C + L_AD + L_MS + L_SS`.
//!
//! All rows that pass through the classification path (source batch, target
//! batch, mixed MixMatch rows, optional extra pseudo-labeled rows) are stacked
//! into a single forward pass. Each loss writes its gradient at the features
//! or logits of its own row range, and a single backward pass accumulates the
//! parameter gradients.
//!
//! Quantities that are constants for the gradient (target pseudo-labels used
//! by the centroids, MixMatch guesses and mixing) are computed up front by
//! [`freeze_step`], so [`evaluate_step`] is a deterministic function of the
//! parameters and can be checked against finite differences.

use alloc::vec::Vec;

use rand::Rng;

use super::adversarial::{adversarial_backward, adversarial_value, domain_labels};
use super::centroids::{semantic_loss_grad, CentroidBank, CentroidProposal, Side};
use super::mixmatch::{mixmatch_terms, plan_mixmatch, MixMatchConfig, MixMatchPlan};
use crate::data::Domain;
use crate::diffcore::ops::{cross_entropy, cross_entropy_logit_grad, one_hot_checked, softmax_backward};
use crate::diffcore::Matrix;
use crate::model::GsdeModel;
use crate::{Error, Result};

/// Which adaptation losses are active. `L_C` always is.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LossSwitches {
    pub adversarial: bool,
    pub semantic: bool,
    pub semi_supervised: bool,
}

impl LossSwitches {
    pub const ALL: Self = Self { adversarial: true, semantic: true, semi_supervised: true };
    pub const NONE: Self = Self { adversarial: false, semantic: false, semi_supervised: false };
}

impl Default for LossSwitches {
    fn default() -> Self {
        Self::ALL
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSettings {
    pub switches: LossSwitches,
    pub l_am: f64,
    pub mixmatch: MixMatchConfig,
    /// Feed pseudo-source rows to MixMatch as unlabeled data instead of labeled.
    pub mixmatch_pseudo_as_unlabeled: bool,
}

/// Row batches for one step.
#[derive(Debug, Clone, Copy)]
pub struct StepInputs<'a> {
    pub source_x: &'a Matrix,
    pub source_labels: &'a [usize],
    pub source_domains: &'a [Domain],
    pub target_x: &'a Matrix,
    /// Pseudo-labeled rows that only enter an additional classification loss.
    pub extra: Option<(&'a Matrix, &'a [usize])>,
}

/// Gradient-constant inputs of a step.
#[derive(Debug, Clone, PartialEq)]
pub struct FrozenStep {
    /// Current argmax predictions for the target batch (centroid assignment).
    pub target_labels: Vec<usize>,
    pub mixmatch: Option<MixMatchPlan>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossBreakdown {
    /// Includes the extra pseudo-label classification term when present.
    pub classification: f64,
    pub adversarial: f64,
    pub semantic: f64,
    pub semi_supervised: f64,
    pub total: f64,
}

impl LossBreakdown {
    fn check(self) -> Result<Self> {
        let parts = [
            ("classification loss", self.classification),
            ("adversarial loss", self.adversarial),
            ("semantic loss", self.semantic),
            ("semi-supervised loss", self.semi_supervised),
        ];
        for (component, v) in parts {
            if !v.is_finite() {
                return Err(Error::NonFinite { component });
            }
        }
        Ok(self)
    }
}

/// Result of a backward step: the losses and the centroid updates to commit.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub losses: LossBreakdown,
    pub centroid_updates: Vec<CentroidProposal>,
}

fn check_inputs(inputs: &StepInputs<'_>) -> Result<()> {
    let n = inputs.source_x.rows();
    if inputs.source_labels.len() != n || inputs.source_domains.len() != n {
        return Err(Error::Shape {
            op: "total_loss",
            expected: (n, inputs.source_x.cols()),
            got: (inputs.source_labels.len(), inputs.source_domains.len()),
        });
    }
    if inputs.source_domains.contains(&Domain::Target) {
        return Err(Error::Contract("target row in the source stream".into()));
    }
    Ok(())
}

/// Computes the gradient-constant parts of a step from the current parameters.
pub fn freeze_step<R: Rng>(
    model: &GsdeModel,
    inputs: &StepInputs<'_>,
    settings: &StepSettings,
    rng: &mut R,
) -> Result<FrozenStep> {
    check_inputs(inputs)?;
    let target_labels = if settings.switches.semantic {
        model.predict_probs(inputs.target_x)?.argmax_rows()
    } else {
        Vec::new()
    };
    let mixmatch = if settings.switches.semi_supervised {
        let k = model.dims().classes;
        let (mut labeled, mut unlabeled) = (Vec::new(), Vec::new());
        for (i, d) in inputs.source_domains.iter().enumerate() {
            if *d == Domain::PseudoSource && settings.mixmatch_pseudo_as_unlabeled {
                unlabeled.push(i);
            } else {
                labeled.push(i);
            }
        }
        let lx = inputs.source_x.select_rows(&labeled);
        let labels: Vec<usize> = labeled.iter().map(|&i| inputs.source_labels[i]).collect();
        let ux = Matrix::vstack(&[&inputs.source_x.select_rows(&unlabeled), inputs.target_x])?;
        let targets = one_hot_checked(&labels, k)?;
        Some(plan_mixmatch(model, &settings.mixmatch, &lx, &targets, &ux, rng)?)
    } else {
        None
    };
    Ok(FrozenStep { target_labels, mixmatch })
}

struct Layout {
    source: (usize, usize),
    target: (usize, usize),
    mix_labeled: (usize, usize),
    mix_unlabeled: (usize, usize),
    extra: (usize, usize),
}

fn stack_rows(inputs: &StepInputs<'_>, frozen: &FrozenStep) -> Result<(Matrix, Layout)> {
    let empty = Matrix::zeros(0, inputs.source_x.cols());
    let (ml, mu) = match &frozen.mixmatch {
        Some(plan) => (&plan.labeled_x, &plan.unlabeled_x),
        None => (&empty, &empty),
    };
    let extra = inputs.extra.map_or(&empty, |(x, _)| x);
    let parts = [inputs.source_x, inputs.target_x, ml, mu, extra];
    let mut bounds = [(0, 0); 5];
    let mut at = 0;
    for (b, p) in bounds.iter_mut().zip(parts) {
        *b = (at, at + p.rows());
        at += p.rows();
    }
    let x = Matrix::vstack(&parts)?;
    let layout = Layout {
        source: bounds[0],
        target: bounds[1],
        mix_labeled: bounds[2],
        mix_unlabeled: bounds[3],
        extra: bounds[4],
    };
    Ok((x, layout))
}

fn add_rows(dst: &mut Matrix, (start, end): (usize, usize), src: &Matrix) {
    for (i, r) in (start..end).enumerate() {
        dst.row_mut(r).iter_mut().zip(src.row(i)).for_each(|(d, s)| *d += s);
    }
}

/// Loss heads for a stacked forward pass. In training mode the
/// discriminator's gradients are accumulated and the returned `d_features` /
/// `d_logits` are the full upstream gradients for the classification path.
struct Heads {
    losses: LossBreakdown,
    d_features: Matrix,
    d_logits: Matrix,
    updates: Vec<CentroidProposal>,
}

enum Mode<'m> {
    Evaluate(&'m GsdeModel),
    Train(&'m mut GsdeModel),
}

fn compute_heads(
    mut mode: Mode<'_>,
    probs_features: (&Matrix, &Matrix),
    layout: &Layout,
    bank: &CentroidBank,
    inputs: &StepInputs<'_>,
    frozen: &FrozenStep,
    settings: &StepSettings,
) -> Result<Heads> {
    let (features, probs) = probs_features;
    let rows = features.rows();
    let k = probs.cols();
    let mut losses = LossBreakdown::default();
    let mut d_features = Matrix::zeros(rows, features.cols());
    let mut d_probs = Matrix::zeros(rows, k);
    let mut d_logits = Matrix::zeros(rows, k);
    let mut updates = Vec::new();

    // classification on the source stream
    let src_probs = probs.slice_rows(layout.source.0, layout.source.1);
    let src_targets = one_hot_checked(inputs.source_labels, k)?;
    losses.classification = cross_entropy(&src_probs, &src_targets)?;
    add_rows(&mut d_logits, layout.source, &cross_entropy_logit_grad(&src_probs, &src_targets)?);
    if let Some((_, labels)) = inputs.extra {
        let p = probs.slice_rows(layout.extra.0, layout.extra.1);
        let t = one_hot_checked(labels, k)?;
        losses.classification += cross_entropy(&p, &t)?;
        add_rows(&mut d_logits, layout.extra, &cross_entropy_logit_grad(&p, &t)?);
    }

    let st = (layout.source.0, layout.target.1);
    if settings.switches.adversarial {
        let f = features.slice_rows(st.0, st.1);
        let p = probs.slice_rows(st.0, st.1);
        let d = domain_labels(layout.source.1 - layout.source.0, layout.target.1 - layout.target.0);
        match &mut mode {
            Mode::Train(m) => {
                let g = adversarial_backward(m, &f, &p, &d, settings.l_am)?;
                losses.adversarial = g.loss;
                add_rows(&mut d_features, st, &g.d_features);
                add_rows(&mut d_probs, st, &g.d_probs);
            }
            Mode::Evaluate(m) => losses.adversarial = adversarial_value(m, &f, &p, &d, settings.l_am)?,
        }
    }

    if settings.switches.semantic {
        let fs = features.slice_rows(layout.source.0, layout.source.1);
        let ft = features.slice_rows(layout.target.0, layout.target.1);
        let src = bank.propose(Side::Source, &fs, inputs.source_labels)?;
        let tgt = bank.propose(Side::Target, &ft, &frozen.target_labels)?;
        let (loss, d_cs, d_ct) =
            semantic_loss_grad(&src.centroids, &src.initialized, &tgt.centroids, &tgt.initialized, settings.l_am);
        losses.semantic = loss;
        add_rows(&mut d_features, layout.source, &src.backprop(&d_cs)?);
        add_rows(&mut d_features, layout.target, &tgt.backprop(&d_ct)?);
        updates.push(src);
        updates.push(tgt);
    }

    if let Some(plan) = frozen.mixmatch.as_ref().filter(|_| settings.switches.semi_supervised) {
        let pl = probs.slice_rows(layout.mix_labeled.0, layout.mix_labeled.1);
        let pu = probs.slice_rows(layout.mix_unlabeled.0, layout.mix_unlabeled.1);
        let (loss, dl, du) = mixmatch_terms(&settings.mixmatch, plan, &pl, &pu)?;
        losses.semi_supervised = loss;
        add_rows(&mut d_logits, layout.mix_labeled, &dl);
        add_rows(&mut d_logits, layout.mix_unlabeled, &du);
    }

    d_logits.add_assign(&softmax_backward(probs, &d_probs)?)?;
    losses.total = losses.classification + losses.adversarial + losses.semantic + losses.semi_supervised;
    Ok(Heads { losses: losses.check()?, d_features, d_logits, updates })
}

/// Loss values of a step without touching any gradient.
pub fn evaluate_step(
    model: &GsdeModel,
    bank: &CentroidBank,
    inputs: &StepInputs<'_>,
    frozen: &FrozenStep,
    settings: &StepSettings,
) -> Result<LossBreakdown> {
    check_inputs(inputs)?;
    let (x, layout) = stack_rows(inputs, frozen)?;
    let f = model.features(&x)?;
    let p = model.class_probs(&f)?;
    Ok(compute_heads(Mode::Evaluate(model), (&f, &p), &layout, bank, inputs, frozen, settings)?.losses)
}

/// Accumulates the gradient of the total loss into `model`.
///
/// Feature-path parameters receive the adversarial gradient through the
/// reversal layer (`-l_am` times the gradient of `L_AD`); discriminator
/// parameters receive it unreversed. The returned centroid updates are not
/// yet committed to `bank`.
pub fn backward_step(
    model: &mut GsdeModel,
    bank: &CentroidBank,
    inputs: &StepInputs<'_>,
    frozen: &FrozenStep,
    settings: &StepSettings,
) -> Result<StepOutcome> {
    check_inputs(inputs)?;
    let (x, layout) = stack_rows(inputs, frozen)?;
    let cache = model.forward(&x)?;
    let heads = compute_heads(
        Mode::Train(&mut *model),
        (&cache.features, &cache.probs),
        &layout,
        bank,
        inputs,
        frozen,
        settings,
    )?;
    model.backward(&cache, &heads.d_features, &heads.d_logits)?;
    Ok(StepOutcome { losses: heads.losses, centroid_updates: heads.updates })
}

/// Value of the total loss for a source and a target batch, with the
/// gradient-constant parts drawn from `seed`.
pub fn total_loss(
    model: &GsdeModel,
    bank: &CentroidBank,
    inputs: &StepInputs<'_>,
    settings: &StepSettings,
    seed: u64,
) -> Result<LossBreakdown> {
    let frozen = freeze_step(model, inputs, settings, &mut crate::rng::seeded(seed))?;
    evaluate_step(model, bank, inputs, &frozen, settings)
}
