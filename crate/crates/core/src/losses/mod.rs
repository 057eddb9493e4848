//! Training losses: classification, conditional adversarial, moving-centroid
//! semantic, and MixMatch, plus the step that sums them.

mod adversarial;
mod centroids;
mod classification;
mod mixmatch;
mod total;

pub use adversarial::{adversarial_backward, adversarial_loss, adversarial_value, domain_labels, AdversarialGrads};
pub use centroids::{push_terms, semantic_loss, semantic_loss_grad, CentroidBank, CentroidProposal, Side};
pub use classification::classification_loss;
pub use mixmatch::{mixmatch_loss, mixmatch_terms, mixup, plan_mixmatch, sharpen, MixMatchConfig, MixMatchPlan};
pub use total::{
    backward_step, evaluate_step, freeze_step, total_loss, FrozenStep, LossBreakdown, LossSwitches, StepInputs,
    StepOutcome, StepSettings,
};
