use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::data::{minibatch_iter, Accuracy, Dataset, Domain, EpochSampler, LabeledPool, LabeledSample, TargetPool, TargetTruth};
use crate::diffcore::{sgd_step, Matrix};
use crate::losses::{backward_step, freeze_step, CentroidBank, LossBreakdown, StepInputs, StepSettings};
use crate::model::{init_model, GrlSchedule, GsdeModel};
use crate::rng::{derive_seed2, seeded};
use crate::scoring::{expansion_size, score_targets, select_top, ScoreTable};
use crate::{Error, Result};

use super::ExperimentConfig;

const STREAM_INIT: u64 = 1;
const STREAM_BATCHES: u64 = 2;
const STREAM_STEP: u64 = 3;
const STREAM_EXTRA: u64 = 4;

/// One evaluation checkpoint inside a run.
#[derive(Debug, Clone, PartialEq)]
pub struct TracePoint {
    /// Optimization steps completed.
    pub iteration: usize,
    /// `None` when no ground truth is available.
    pub accuracy: Option<Accuracy>,
    /// Mean discriminator output over the (expanded) source set.
    pub disc_source: f64,
    /// Mean discriminator output over the target set.
    pub disc_target: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    /// 1-based run index.
    pub run: usize,
    pub expansion_size: usize,
    /// Accuracy of the pseudo-labels used in this run; `None` on run 1 or
    /// without ground truth.
    pub pseudo_accuracy: Option<f64>,
    pub final_accuracy: Option<Accuracy>,
    pub trace: Vec<TracePoint>,
    /// Losses of the last completed step.
    pub last_losses: Option<LossBreakdown>,
    pub start_fingerprint: u64,
    pub end_fingerprint: u64,
    /// Set when the run was aborted.
    pub failure: Option<String>,
}

/// All runs of one experiment.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub records: Vec<RunRecord>,
    /// Score table computed after each completed run.
    pub tables: Vec<ScoreTable>,
    /// Final model of each completed run.
    pub models: Vec<GsdeModel>,
}

impl Experiment {
    /// The aborted run, if any. Later runs were not attempted.
    pub fn failure(&self) -> Option<&RunRecord> {
        self.records.iter().find(|r| r.failure.is_some())
    }
}

/// `D_s ∪ selected targets`, the targets relabeled with their pseudo-labels
/// and tagged [`Domain::PseudoSource`].
pub fn expand_source(source: &Dataset, target: &TargetPool, selection: &[(usize, usize)]) -> Result<Dataset> {
    if target.features.cols() != source.feature_dim {
        return Err(Error::Shape {
            op: "expand_source",
            expected: (target.len(), source.feature_dim),
            got: target.features.shape(),
        });
    }
    let mut samples = source.samples().to_vec();
    for &(i, label) in selection {
        if i >= target.len() {
            return Err(Error::Contract(format!("selected target {i} out of range")));
        }
        samples.push(LabeledSample {
            features: target.features.row(i).to_vec(),
            label: Some(label),
            domain: Domain::PseudoSource,
        });
    }
    Dataset::new(source.name.clone(), source.num_classes, source.feature_dim, samples)
}

fn evaluate(model: &GsdeModel, pool: &LabeledPool, target: &TargetPool, truth: Option<&TargetTruth>, iteration: usize) -> Result<TracePoint> {
    let mean = |v: Vec<f64>| v.iter().sum::<f64>() / v.len().max(1) as f64;
    let accuracy = match truth {
        Some(t) => Some(t.accuracy(&model.predict_probs(&target.features)?.argmax_rows())),
        None => None,
    };
    Ok(TracePoint {
        iteration,
        accuracy,
        disc_source: mean(model.domain_outputs(&pool.features)?),
        disc_target: mean(model.domain_outputs(&target.features)?),
    })
}

/// Pseudo-labeled rows trained with a plain classification term.
pub struct ExtraLabels<'a> {
    pub features: &'a Matrix,
    pub labels: &'a [usize],
}

/// Trains `model` on `pool` and `target` for `config.iterations` steps.
/// The record's `run`, `expansion_size` and `pseudo_accuracy` are left for
/// the caller.
pub fn train_single_run(
    config: &ExperimentConfig,
    model: &mut GsdeModel,
    pool: &LabeledPool,
    target: &TargetPool,
    extra: Option<ExtraLabels<'_>>,
    truth: Option<&TargetTruth>,
    run_seed: u64,
) -> Result<RunRecord> {
    if pool.is_empty() || target.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let batch = config.batch_size.min(pool.len()).min(target.len());
    let mut stream = minibatch_iter(pool.len(), target.len(), batch, derive_seed2(run_seed, STREAM_BATCHES, 0))?;
    let mut extra_sampler = match &extra {
        Some(e) if !e.labels.is_empty() => {
            Some(EpochSampler::new(e.labels.len(), batch.min(e.labels.len()), derive_seed2(run_seed, STREAM_EXTRA, 0))?)
        }
        _ => None,
    };
    let mut step_rng = seeded(derive_seed2(run_seed, STREAM_STEP, 0));
    let mut bank = CentroidBank::new(pool.num_classes, config.bottleneck_dim, config.theta)?;
    let grl = GrlSchedule { gamma: config.grl_gamma };
    let switches = config.ablation.switches();

    let mut record = RunRecord {
        run: 0,
        expansion_size: 0,
        pseudo_accuracy: None,
        final_accuracy: None,
        trace: Vec::new(),
        last_losses: None,
        start_fingerprint: model.fingerprint(),
        end_fingerprint: 0,
        failure: None,
    };
    record.trace.push(evaluate(model, pool, target, truth, 0)?);

    for it in 0..config.iterations {
        let progress = it as f64 / config.iterations as f64;
        let (si, ti) = stream.next().expect("endless stream");
        let sx = pool.features.select_rows(&si);
        let sl: Vec<usize> = si.iter().map(|&i| pool.labels[i]).collect();
        let sd: Vec<Domain> = si.iter().map(|&i| pool.domains[i]).collect();
        let tx = target.features.select_rows(&ti);
        let extra_rows = match (&extra, extra_sampler.as_mut()) {
            (Some(e), Some(s)) => {
                let idx = s.next_batch();
                Some((e.features.select_rows(&idx), idx.iter().map(|&i| e.labels[i]).collect::<Vec<_>>()))
            }
            _ => None,
        };
        let inputs = StepInputs {
            source_x: &sx,
            source_labels: &sl,
            source_domains: &sd,
            target_x: &tx,
            extra: extra_rows.as_ref().map(|(x, l)| (x, l.as_slice())),
        };
        let settings = StepSettings {
            switches,
            l_am: grl.lam(progress),
            mixmatch: config.mixmatch,
            mixmatch_pseudo_as_unlabeled: config.mixmatch_pseudo_as_unlabeled,
        };
        let step = freeze_step(model, &inputs, &settings, &mut step_rng).and_then(|frozen| {
            model.zero_grad();
            backward_step(model, &bank, &inputs, &frozen, &settings)
        });
        let outcome = match step {
            Ok(o) => o,
            Err(e @ Error::NonFinite { .. }) => {
                record.failure = Some(format!("iteration {it}: {e}"));
                record.end_fingerprint = model.fingerprint();
                return Ok(record);
            }
            Err(e) => return Err(e),
        };
        for update in outcome.centroid_updates {
            bank.commit(update);
        }
        sgd_step(model.layers_mut(), config.learning_rate_at(progress), config.weight_decay);
        record.last_losses = Some(outcome.losses);
        if (it + 1) % config.eval_interval == 0 || it + 1 == config.iterations {
            record.trace.push(evaluate(model, pool, target, truth, it + 1)?);
        }
    }
    record.final_accuracy = record.trace.last().and_then(|p| p.accuracy);
    record.end_fingerprint = model.fingerprint();
    Ok(record)
}

/// The full outer loop: `max_runs` runs, each on a source set expanded with
/// the most confident targets of the previous run.
///
/// `truth` is only consulted for accuracy reporting. A run that hits a
/// non-finite loss ends the experiment; the records so far are returned.
pub fn run_gsde(
    config: &ExperimentConfig,
    source: &Dataset,
    target: &TargetPool,
    truth: Option<&TargetTruth>,
) -> Result<Experiment> {
    config.validate()?;
    if source.is_empty() || target.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if target.num_classes != source.num_classes {
        return Err(crate::error::param_err("source and target disagree on the number of classes"));
    }
    let base_pool = source.labeled_pool()?;
    let dims = config.dims(source.feature_dim, source.num_classes);
    let scoring = config.effective_scoring();
    let n_t = target.len();

    let mut experiment = Experiment { records: Vec::new(), tables: Vec::new(), models: Vec::new() };
    let mut selection: Vec<(usize, usize)> = Vec::new();
    for run in 1..=config.max_runs {
        let size = expansion_size(run, config.max_runs, n_t)?;
        debug_assert_eq!(size, selection.len());
        let pseudo_accuracy = match truth {
            Some(t) if !selection.is_empty() => {
                let (idx, labels): (Vec<usize>, Vec<usize>) = selection.iter().copied().unzip();
                Some(t.accuracy_of(&idx, &labels).overall)
            }
            _ => None,
        };

        let (pool, extra_x, extra_labels) = if config.ablation.no_expansion {
            let idx: Vec<usize> = selection.iter().map(|s| s.0).collect();
            let labels: Vec<usize> = selection.iter().map(|s| s.1).collect();
            (base_pool.clone(), target.features.select_rows(&idx), labels)
        } else {
            let expanded = expand_source(source, target, &selection)?;
            (expanded.labeled_pool()?, Matrix::zeros(0, source.feature_dim), Vec::new())
        };
        let extra = (!extra_labels.is_empty()).then_some(ExtraLabels { features: &extra_x, labels: &extra_labels });

        let run_seed = derive_seed2(config.seed, STREAM_INIT, run as u64);
        let mut model = match experiment.models.last() {
            Some(prev) if config.ablation.no_reinit => prev.clone(),
            _ => init_model(dims, config.bottlenecks, derive_seed2(run_seed, STREAM_INIT, 0))?,
        };
        let mut record = train_single_run(config, &mut model, &pool, target, extra, truth, run_seed)?;
        record.run = run;
        record.expansion_size = size;
        record.pseudo_accuracy = pseudo_accuracy;
        let failed = record.failure.is_some();
        experiment.records.push(record);
        if failed {
            break;
        }

        let table = score_targets(&model, &base_pool.features, &base_pool.labels, &target.features, &scoring)?;
        table.check_simplex(1e-6)?;
        if run < config.max_runs {
            selection = select_top(&table, expansion_size(run + 1, config.max_runs, n_t)?);
        }
        experiment.tables.push(table);
        experiment.models.push(model);
    }
    Ok(experiment)
}

impl core::fmt::Display for RunRecord {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        let acc = self.final_accuracy.map_or_else(|| "n/a".to_string(), |a| format!("{:.4}", a.overall));
        write!(f, "run {} (+{} pseudo): accuracy {acc}", self.run, self.expansion_size)
    }
}
