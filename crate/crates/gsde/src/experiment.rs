//! Multi-seed experiment execution and output files.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use gsde_core::data::{two_moons_benchmark, Dataset, Domain};
use gsde_core::driver::{run_gsde, Experiment, ExperimentConfig};

use crate::checkpoint::save_checkpoint;
use crate::config::{DataSpec, RunSpec};
use crate::dataset_io::load_csv;
use crate::error::{GsdeError, Result};
use crate::metrics::{metrics_rows, summary_row, write_metrics, write_summary, MetricsRow, SummaryRow};
use crate::scores::write_scores;

/// Source and target datasets of an experiment.
pub fn load_data(spec: &DataSpec) -> Result<(Dataset, Dataset)> {
    match spec {
        DataSpec::TwoMoons { n, noise, rotation_deg, seed } => {
            Ok(two_moons_benchmark(*n, *noise, *rotation_deg, *seed)?)
        }
        DataSpec::Files { source, target } => {
            let s = load_csv(source, None)?;
            let t = load_csv(target, Some(s.num_classes))?;
            Ok((s, t))
        }
    }
}

/// Worker count: `GSDE_THREADS` if set, else the available parallelism,
/// never more than `jobs`.
pub fn worker_count(jobs: usize) -> usize {
    let cap = std::env::var("GSDE_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    cap.min(jobs).max(1)
}

/// Runs `f` on every item over a pool of worker threads; results come back
/// in item order.
pub fn parallel_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<R>>> = items.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|s| {
        for _ in 0..worker_count(items.len()) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(item) = items.get(i) else { break };
                let r = f(item);
                *slots[i].lock().expect("no panics while holding the lock") = Some(r);
            });
        }
    });
    slots.into_iter().map(|m| m.into_inner().expect("lock").expect("every slot filled")).collect()
}

/// One seed's experiment and its label-read audit.
#[derive(Debug)]
pub struct SeedOutcome {
    pub seed: u64,
    pub experiment: Experiment,
    /// Target ground-truth reads made outside evaluation.
    pub unscoped_label_reads: usize,
}

/// Runs the configured experiment once per seed.
pub fn run_seeds(config: &ExperimentConfig, seeds: &[u64], source: &Dataset, target: &Dataset) -> Result<Vec<SeedOutcome>> {
    if target.samples().iter().any(|s| s.domain != Domain::Target) {
        return Err(GsdeError::Config("target file must only contain target rows".into()));
    }
    let results = parallel_map(seeds, |&seed| -> Result<SeedOutcome> {
        let (pool, truth) = target.split_target();
        let cfg = ExperimentConfig { seed, ..config.clone() };
        let experiment = run_gsde(&cfg, source, &pool, Some(&truth))?;
        Ok(SeedOutcome { seed, experiment, unscoped_label_reads: truth.unscoped_reads() })
    });
    results.into_iter().collect()
}

/// Paths written by [`write_outputs`].
#[derive(Debug, Clone)]
pub struct OutputFiles {
    pub config: PathBuf,
    pub metrics: PathBuf,
    pub summary: PathBuf,
}

fn create_new(path: &Path) -> Result<fs::File> {
    fs::OpenOptions::new()
        .write(true)
        .create_new(true)
        .open(path)
        .map_err(|e| GsdeError::io(path, e))
}

/// Writes the resolved config, metrics, summary, score dumps and
/// checkpoints into `dir`. Existing files are never overwritten.
pub fn write_outputs(dir: &Path, spec: &RunSpec, outcomes: &[SeedOutcome]) -> Result<OutputFiles> {
    fs::create_dir_all(dir.join("scores")).map_err(|e| GsdeError::io(dir, e))?;
    fs::create_dir_all(dir.join("checkpoints")).map_err(|e| GsdeError::io(dir, e))?;
    let files = OutputFiles {
        config: dir.join("config.txt"),
        metrics: dir.join("metrics.csv"),
        summary: dir.join("summary.csv"),
    };
    use std::io::Write;
    create_new(&files.config)?.write_all(spec.to_text().as_bytes()).map_err(|e| GsdeError::io(&files.config, e))?;

    let mut metrics: Vec<MetricsRow> = Vec::new();
    let mut summary: Vec<SummaryRow> = Vec::new();
    for o in outcomes {
        for r in &o.experiment.records {
            metrics.extend(metrics_rows(&spec.id, o.seed, r));
            summary.push(summary_row(&spec.id, o.seed, r));
        }
        for (i, t) in o.experiment.tables.iter().enumerate() {
            let p = dir.join("scores").join(format!("seed{}_run{}.csv", o.seed, i + 1));
            write_scores(t, create_new(&p)?)?;
        }
        for (i, m) in o.experiment.models.iter().enumerate() {
            let p = dir.join("checkpoints").join(format!("seed{}_run{}.gsde1", o.seed, i + 1));
            if p.exists() {
                return Err(GsdeError::io(&p, std::io::ErrorKind::AlreadyExists.into()));
            }
            save_checkpoint(m, &p)?;
        }
    }
    write_metrics(&metrics, create_new(&files.metrics)?)?;
    write_summary(&summary, create_new(&files.summary)?)?;
    Ok(files)
}

/// The first numeric failure across seeds, if any.
pub fn numeric_failure(outcomes: &[SeedOutcome]) -> Option<String> {
    outcomes
        .iter()
        .find_map(|o| o.experiment.failure().map(|r| format!("seed {} run {}: {}", o.seed, r.run, r.failure.as_deref().unwrap_or(""))))
}
