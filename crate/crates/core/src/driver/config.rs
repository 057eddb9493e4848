use crate::error::param_err;
use crate::losses::{LossSwitches, MixMatchConfig};
use crate::model::Dims;
use crate::scoring::ScoringConfig;
use crate::Result;

/// Ablation switches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Ablation {
    /// Start each run from the previous run's final parameters.
    pub no_reinit: bool,
    /// Keep the source set fixed; selected targets only add a classification
    /// term.
    pub no_expansion: bool,
    pub disable_ad: bool,
    pub disable_ms: bool,
    pub disable_ss: bool,
    /// Score targets by classifier probabilities alone.
    pub disable_scoring_extras: bool,
}

impl Ablation {
    pub fn switches(&self) -> LossSwitches {
        LossSwitches { adversarial: !self.disable_ad, semantic: !self.disable_ms, semi_supervised: !self.disable_ss }
    }
}

/// Everything one experiment needs besides the data.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// `N`
    pub max_runs: usize,
    pub iterations: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// `lr(p) = lr0 · (1 + lr_gamma · p)^(-lr_power)`
    pub lr_gamma: f64,
    pub lr_power: f64,
    pub weight_decay: f64,
    pub hidden: usize,
    pub bottleneck_dim: usize,
    pub disc_hidden: usize,
    pub extractor_depth: usize,
    /// `k`
    pub bottlenecks: usize,
    pub scoring: ScoringConfig,
    /// Centroid momentum.
    pub theta: f64,
    pub grl_gamma: f64,
    pub mixmatch: MixMatchConfig,
    pub mixmatch_pseudo_as_unlabeled: bool,
    pub eval_interval: usize,
    pub seed: u64,
    pub ablation: Ablation,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            max_runs: 5,
            iterations: 1000,
            batch_size: 64,
            learning_rate: 0.4,
            lr_gamma: 10.0,
            lr_power: 0.75,
            weight_decay: 5e-4,
            hidden: 64,
            bottleneck_dim: 16,
            disc_hidden: 64,
            extractor_depth: 2,
            bottlenecks: 5,
            scoring: ScoringConfig::default(),
            theta: 0.7,
            grl_gamma: 10.0,
            mixmatch: MixMatchConfig::default(),
            mixmatch_pseudo_as_unlabeled: false,
            eval_interval: 50,
            seed: 0,
            ablation: Ablation::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_runs == 0 {
            return Err(param_err("max_runs must be at least 1"));
        }
        if self.batch_size == 0 || self.eval_interval == 0 || self.bottlenecks == 0 {
            return Err(param_err("batch_size, eval_interval and bottlenecks must be positive"));
        }
        if !(self.learning_rate > 0.0) || !(self.weight_decay >= 0.0) || !(self.lr_gamma >= 0.0) || !(self.lr_power >= 0.0)
        {
            return Err(param_err("learning rate must be positive and annealing parameters nonnegative"));
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(param_err("theta must lie in [0, 1]"));
        }
        if !(self.grl_gamma >= 0.0) {
            return Err(param_err("grl_gamma must be nonnegative"));
        }
        if self.scoring.neighbors == 0 || self.scoring.lp_neighbors == 0 || !(self.scoring.lp_lambda >= 0.0) {
            return Err(param_err("scoring needs positive neighbor counts and lambda >= 0"));
        }
        self.mixmatch.validate()
    }

    pub fn dims(&self, input: usize, classes: usize) -> Dims {
        Dims {
            input,
            hidden: self.hidden,
            bottleneck: self.bottleneck_dim,
            classes,
            disc_hidden: self.disc_hidden,
            extractor_depth: self.extractor_depth,
        }
    }

    /// Annealed learning rate at training progress `p ∈ [0, 1]`.
    pub fn learning_rate_at(&self, p: f64) -> f64 {
        self.learning_rate * crate::math::pow(1.0 + self.lr_gamma * p, -self.lr_power)
    }

    /// Scoring settings with the ablation applied.
    pub fn effective_scoring(&self) -> ScoringConfig {
        ScoringConfig { extras: self.scoring.extras && !self.ablation.disable_scoring_extras, ..self.scoring }
    }
}
