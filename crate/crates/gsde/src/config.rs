//! Flat `key = value` experiment configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Every key is
//! optional; unknown keys are errors. `--set key=value` overrides use the
//! same keys.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use gsde_core::driver::ExperimentConfig;
use gsde_core::scoring::TargetAnchor;

use crate::error::{GsdeError, Result};

/// Where the source and target data come from.
#[derive(Debug, Clone, PartialEq)]
pub enum DataSpec {
    /// Two-moons source and a rotated two-moons target.
    TwoMoons { n: usize, noise: f64, rotation_deg: f64, seed: u64 },
    /// Dataset CSV files.
    Files { source: PathBuf, target: PathBuf },
}

/// A configured experiment: the core settings plus seeds and data.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub id: String,
    pub experiment: ExperimentConfig,
    pub seeds: Vec<u64>,
    pub data: DataSpec,
}

impl Default for RunSpec {
    fn default() -> Self {
        Self {
            id: "gsde".into(),
            experiment: ExperimentConfig::default(),
            seeds: vec![0, 1, 2],
            data: DataSpec::TwoMoons { n: 1000, noise: 0.15, rotation_deg: 30.0, seed: 1 },
        }
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    v.parse::<T>().map_err(|e| GsdeError::Config(format!("{key} = {v:?}: {e}")))
}

impl RunSpec {
    /// Applies one `key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let e = &mut self.experiment;
        let v = value.trim();
        match key.trim() {
            "id" => self.id = v.to_string(),
            "seeds" => {
                self.seeds = v.split(',').map(|s| parse_value(key, s.trim())).collect::<Result<_>>()?;
            }
            "max_runs" => e.max_runs = parse_value(key, v)?,
            "iterations" => e.iterations = parse_value(key, v)?,
            "batch_size" => e.batch_size = parse_value(key, v)?,
            "learning_rate" => e.learning_rate = parse_value(key, v)?,
            "lr_gamma" => e.lr_gamma = parse_value(key, v)?,
            "lr_power" => e.lr_power = parse_value(key, v)?,
            "weight_decay" => e.weight_decay = parse_value(key, v)?,
            "model.hidden" => e.hidden = parse_value(key, v)?,
            "model.bottleneck_dim" => e.bottleneck_dim = parse_value(key, v)?,
            "model.disc_hidden" => e.disc_hidden = parse_value(key, v)?,
            "model.extractor_depth" => e.extractor_depth = parse_value(key, v)?,
            "model.bottlenecks" => e.bottlenecks = parse_value(key, v)?,
            "theta" => e.theta = parse_value(key, v)?,
            "grl_gamma" => e.grl_gamma = parse_value(key, v)?,
            "eval_interval" => e.eval_interval = parse_value(key, v)?,
            "scoring.neighbors" => e.scoring.neighbors = parse_value(key, v)?,
            "scoring.lp_lambda" => e.scoring.lp_lambda = parse_value(key, v)?,
            "scoring.lp_neighbors" => e.scoring.lp_neighbors = parse_value(key, v)?,
            "scoring.lp_target_anchor" => {
                e.scoring.target_anchor = match v {
                    "probs" => TargetAnchor::Probs,
                    "zero" => TargetAnchor::Zero,
                    _ => return Err(GsdeError::Config(format!("{key}: expected probs or zero, got {v:?}"))),
                }
            }
            "mixmatch.num_augment" => e.mixmatch.num_augment = parse_value(key, v)?,
            "mixmatch.temperature" => e.mixmatch.temperature = parse_value(key, v)?,
            "mixmatch.alpha" => e.mixmatch.mixup_alpha = parse_value(key, v)?,
            "mixmatch.unlabeled_weight" => e.mixmatch.unlabeled_weight = parse_value(key, v)?,
            "mixmatch.noise_sd" => e.mixmatch.augment_noise_sd = parse_value(key, v)?,
            "mixmatch.pseudo_as_unlabeled" => e.mixmatch_pseudo_as_unlabeled = parse_value(key, v)?,
            "ablation.no_reinit" => e.ablation.no_reinit = parse_value(key, v)?,
            "ablation.no_expansion" => e.ablation.no_expansion = parse_value(key, v)?,
            "ablation.disable_ad" => e.ablation.disable_ad = parse_value(key, v)?,
            "ablation.disable_ms" => e.ablation.disable_ms = parse_value(key, v)?,
            "ablation.disable_ss" => e.ablation.disable_ss = parse_value(key, v)?,
            "ablation.disable_scoring_extras" => e.ablation.disable_scoring_extras = parse_value(key, v)?,
            "data.kind" => match v {
                "two-moons" => {
                    if !matches!(self.data, DataSpec::TwoMoons { .. }) {
                        self.data = RunSpec::default().data;
                    }
                }
                "files" => {
                    if !matches!(self.data, DataSpec::Files { .. }) {
                        self.data = DataSpec::Files { source: PathBuf::new(), target: PathBuf::new() };
                    }
                }
                _ => return Err(GsdeError::Config(format!("data.kind: unknown kind {v:?}"))),
            },
            k @ ("data.n" | "data.noise" | "data.rotation" | "data.seed") => {
                let DataSpec::TwoMoons { n, noise, rotation_deg, seed } = &mut self.data else {
                    return Err(GsdeError::Config(format!("{k} needs data.kind = two-moons")));
                };
                match k {
                    "data.n" => *n = parse_value(k, v)?,
                    "data.noise" => *noise = parse_value(k, v)?,
                    "data.rotation" => *rotation_deg = parse_value(k, v)?,
                    _ => *seed = parse_value(k, v)?,
                }
            }
            k @ ("data.source" | "data.target") => {
                let DataSpec::Files { source, target } = &mut self.data else {
                    return Err(GsdeError::Config(format!("{k} needs data.kind = files")));
                };
                if k == "data.source" {
                    *source = PathBuf::from(v);
                } else {
                    *target = PathBuf::from(v);
                }
            }
            other => return Err(GsdeError::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Applies a `key=value` override.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| GsdeError::Config(format!("override {assignment:?} is not key=value")))?;
        self.set(k, v)
    }

    /// Parses config text on top of the defaults.
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut spec = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| GsdeError::parse(origin, i + 1, format!("expected key = value, found {line:?}")))?;
            spec.set(k, v).map_err(|e| GsdeError::parse(origin, i + 1, e.to_string()))?;
        }
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| GsdeError::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(GsdeError::Config("at least one seed is required".into()));
        }
        self.experiment.validate().map_err(|e| GsdeError::Config(e.to_string()))
    }

    /// The resolved configuration in the same `key = value` format.
    pub fn to_text(&self) -> String {
        let e = &self.experiment;
        let seeds: Vec<String> = self.seeds.iter().map(u64::to_string).collect();
        let anchor = match e.scoring.target_anchor {
            TargetAnchor::Probs => "probs",
            TargetAnchor::Zero => "zero",
        };
        let mut s = String::new();
        let mut kv = |k: &str, v: String| writeln!(s, "{k} = {v}").expect("writing to a String");
        kv("id", self.id.clone());
        kv("seeds", seeds.join(","));
        kv("max_runs", e.max_runs.to_string());
        kv("iterations", e.iterations.to_string());
        kv("batch_size", e.batch_size.to_string());
        kv("learning_rate", e.learning_rate.to_string());
        kv("lr_gamma", e.lr_gamma.to_string());
        kv("lr_power", e.lr_power.to_string());
        kv("weight_decay", e.weight_decay.to_string());
        kv("model.hidden", e.hidden.to_string());
        kv("model.bottleneck_dim", e.bottleneck_dim.to_string());
        kv("model.disc_hidden", e.disc_hidden.to_string());
        kv("model.extractor_depth", e.extractor_depth.to_string());
        kv("model.bottlenecks", e.bottlenecks.to_string());
        kv("theta", e.theta.to_string());
        kv("grl_gamma", e.grl_gamma.to_string());
        kv("eval_interval", e.eval_interval.to_string());
        kv("scoring.neighbors", e.scoring.neighbors.to_string());
        kv("scoring.lp_lambda", e.scoring.lp_lambda.to_string());
        kv("scoring.lp_neighbors", e.scoring.lp_neighbors.to_string());
        kv("scoring.lp_target_anchor", anchor.into());
        kv("mixmatch.num_augment", e.mixmatch.num_augment.to_string());
        kv("mixmatch.temperature", e.mixmatch.temperature.to_string());
        kv("mixmatch.alpha", e.mixmatch.mixup_alpha.to_string());
        kv("mixmatch.unlabeled_weight", e.mixmatch.unlabeled_weight.to_string());
        kv("mixmatch.noise_sd", e.mixmatch.augment_noise_sd.to_string());
        kv("mixmatch.pseudo_as_unlabeled", e.mixmatch_pseudo_as_unlabeled.to_string());
        kv("ablation.no_reinit", e.ablation.no_reinit.to_string());
        kv("ablation.no_expansion", e.ablation.no_expansion.to_string());
        kv("ablation.disable_ad", e.ablation.disable_ad.to_string());
        kv("ablation.disable_ms", e.ablation.disable_ms.to_string());
        kv("ablation.disable_ss", e.ablation.disable_ss.to_string());
        kv("ablation.disable_scoring_extras", e.ablation.disable_scoring_extras.to_string());
        match &self.data {
            DataSpec::TwoMoons { n, noise, rotation_deg, seed } => {
                kv("data.kind", "two-moons".into());
                kv("data.n", n.to_string());
                kv("data.noise", noise.to_string());
                kv("data.rotation", rotation_deg.to_string());
                kv("data.seed", seed.to_string());
            }
            DataSpec::Files { source, target } => {
                kv("data.kind", "files".into());
                kv("data.source", source.display().to_string());
                kv("data.target", target.display().to_string());
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let mut spec = RunSpec::default();
        spec.apply_override("ablation.no_expansion=true").unwrap();
        spec.apply_override("learning_rate=0.125").unwrap();
        spec.apply_override("scoring.lp_target_anchor=zero").unwrap();
        let again = RunSpec::parse(&spec.to_text(), Path::new("mem")).unwrap();
        assert_eq!(again, spec);
    }

    #[test]
    fn bad_lines_report_position() {
        let err = RunSpec::parse("# c\nmax_runs = 3\nnonsense\n", Path::new("c.txt")).unwrap_err();
        assert!(matches!(err, GsdeError::Parse { line: 3, .. }));
        let err = RunSpec::parse("max_runs = three\n", Path::new("c.txt")).unwrap_err();
        assert!(matches!(err, GsdeError::Parse { line: 1, .. }));
        assert!(RunSpec::parse("colour = red\n", Path::new("c.txt")).is_err());
    }

    #[test]
    fn file_data_keys_need_file_kind() {
        let mut spec = RunSpec::default();
        assert!(spec.set("data.source", "a.csv").is_err());
        spec.set("data.kind", "files").unwrap();
        spec.set("data.source", "a.csv").unwrap();
        assert!(spec.set("data.n", "5").is_err());
    }
}
