//! Ablation sweeps aggregated over seeds.

use std::io::Write;

use gsde_core::data::Dataset;
use gsde_core::driver::ExperimentConfig;

use crate::error::{GsdeError, Result};
use crate::experiment::run_seeds;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SweepAxis {
    /// `N ∈ 1..=8`.
    MaxRuns,
    /// `k ∈ {1, 3, 5, 7}` with a single run.
    Bottlenecks,
    /// `{AD}`, `{AD+MS}`, `{AD+MS+SS}` with a single run.
    Losses,
    /// Scoring extras (LS) and multiple bottlenecks (MB) on and off.
    Scoring,
}

/// One sweep point: a label and the config it runs.
pub fn sweep_points(axis: SweepAxis, base: &ExperimentConfig) -> Vec<(String, ExperimentConfig)> {
    let mut points = Vec::new();
    match axis {
        SweepAxis::MaxRuns => {
            for n in 1..=8 {
                points.push((n.to_string(), ExperimentConfig { max_runs: n, ..base.clone() }));
            }
        }
        SweepAxis::Bottlenecks => {
            for k in [1, 3, 5, 7] {
                points.push((k.to_string(), ExperimentConfig { bottlenecks: k, max_runs: 1, ..base.clone() }));
            }
        }
        SweepAxis::Losses => {
            for (label, ms, ss) in [("AD", false, false), ("AD+MS", true, false), ("AD+MS+SS", true, true)] {
                let mut c = ExperimentConfig { max_runs: 1, ..base.clone() };
                c.ablation.disable_ad = false;
                c.ablation.disable_ms = !ms;
                c.ablation.disable_ss = !ss;
                points.push((label.to_string(), c));
            }
        }
        SweepAxis::Scoring => {
            for (label, ls, mb) in [("base", false, false), ("+LS", true, false), ("+MB", false, true), ("+LS+MB", true, true)] {
                let mut c = base.clone();
                c.ablation.disable_scoring_extras = !ls;
                c.bottlenecks = if mb { base.bottlenecks.max(2) } else { 1 };
                points.push((label.to_string(), c));
            }
        }
    }
    points
}

/// Mean and sample standard deviation over seeds of the last run's final
/// accuracy at one sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub point: String,
    pub mean: f64,
    pub std: f64,
    pub seeds: usize,
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 { values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (mean, var.sqrt())
}

pub fn run_sweep(axis: SweepAxis, base: &ExperimentConfig, seeds: &[u64], source: &Dataset, target: &Dataset) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    for (point, cfg) in sweep_points(axis, base) {
        let outcomes = run_seeds(&cfg, seeds, source, target)?;
        let mut finals = Vec::new();
        for o in &outcomes {
            let last = o.experiment.records.last().ok_or_else(|| GsdeError::Config("experiment produced no runs".into()))?;
            if let Some(f) = &last.failure {
                return Err(GsdeError::Numeric(format!("sweep point {point}, seed {}: {f}", o.seed)));
            }
            finals.push(last.final_accuracy.map_or(f64::NAN, |a| a.overall));
        }
        let (mean, std) = mean_std(&finals);
        rows.push(SweepRow { point, mean, std, seeds: finals.len() });
    }
    Ok(rows)
}

pub fn axis_name(axis: SweepAxis) -> &'static str {
    match axis {
        SweepAxis::MaxRuns => "max_runs",
        SweepAxis::Bottlenecks => "bottlenecks",
        SweepAxis::Losses => "losses",
        SweepAxis::Scoring => "scoring",
    }
}

pub fn write_sweep<W: Write>(axis: SweepAxis, rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["axis", "point", "mean_accuracy", "std_accuracy", "seeds"])?;
    for r in rows {
        w.write_record([axis_name(axis).to_string(), r.point.clone(), r.mean.to_string(), r.std.to_string(), r.seeds.to_string()])?;
    }
    w.flush().map_err(|e| GsdeError::io("<sweep>", e))?;
    Ok(())
}
