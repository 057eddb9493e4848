//! Pseudo-label scoring and selection.
//!
//! After a run, every target sample is scored by the mean of three class
//! distributions: the classifier output, the mean output of its nearest
//! target neighbors, and a label-propagation solution over the joint
//! source/target graph. The most confident targets become pseudo-source
//! samples for the next run.

mod neighborhood;
mod propagation;
mod selection;

pub use neighborhood::neighborhood_scores;
pub use propagation::{label_propagation, propagate, renormalize_rows, AffinityGraph, TargetAnchor};
pub use selection::{
    combined_scores, confidence_order, expansion_size, fraction_count, select_top, select_top_fraction, ScoreTable,
};

use crate::diffcore::Matrix;
use crate::model::GsdeModel;
use crate::Result;

/// Settings for [`score_targets`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoringConfig {
    /// Target neighbors averaged into `p_na`.
    pub neighbors: usize,
    /// Smoothness weight of the propagation objective.
    pub lp_lambda: f64,
    /// `k` of the mutual-kNN affinity graph.
    pub lp_neighbors: usize,
    pub target_anchor: TargetAnchor,
    /// When false, the table is scored by classifier probabilities alone.
    pub extras: bool,
}

impl Default for ScoringConfig {
    fn default() -> Self {
        Self { neighbors: 5, lp_lambda: 1.0, lp_neighbors: 10, target_anchor: TargetAnchor::Probs, extras: true }
    }
}

/// Scores every target row with the model in one evaluation pass.
pub fn score_targets(
    model: &GsdeModel,
    source_x: &Matrix,
    source_labels: &[usize],
    target_x: &Matrix,
    cfg: &ScoringConfig,
) -> Result<ScoreTable> {
    let tf = model.features(target_x)?;
    let tp = model.class_probs(&tf)?;
    if !cfg.extras {
        return ScoreTable::from_probs(tp);
    }
    let na = neighborhood_scores(&tf, &tp, cfg.neighbors)?;
    let sf = model.features(source_x)?;
    let all = Matrix::vstack(&[&sf, &tf])?;
    let lp = label_propagation(&all, source_labels, &tp, cfg.lp_lambda, cfg.lp_neighbors, cfg.target_anchor)?;
    combined_scores(&tp, &na, &lp)
}
