use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::sync::atomic::{AtomicUsize, Ordering};

use crate::diffcore::Matrix;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Domain {
    Source,
    Target,
    /// A target sample promoted into the source set with a pseudo-label.
    PseudoSource,
}

impl Domain {
    pub fn tag(self) -> &'static str {
        match self {
            Domain::Source => "source",
            Domain::Target => "target",
            Domain::PseudoSource => "pseudo",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "source" => Some(Domain::Source),
            "target" => Some(Domain::Target),
            "pseudo" => Some(Domain::PseudoSource),
            _ => None,
        }
    }

    /// Whether samples of this domain are fed to supervised losses.
    pub fn is_source_stream(self) -> bool {
        !matches!(self, Domain::Target)
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub features: Vec<f64>,
    /// Ground truth for source rows, pseudo-label for pseudo-source rows.
    /// On target rows this is evaluation-only ground truth, if known.
    pub label: Option<usize>,
    pub domain: Domain,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub num_classes: usize,
    pub feature_dim: usize,
    samples: Vec<LabeledSample>,
}

impl Dataset {
    /// Validates dimensions, class ids, and that source-stream rows are labeled.
    pub fn new(
        name: impl Into<String>,
        num_classes: usize,
        feature_dim: usize,
        samples: Vec<LabeledSample>,
    ) -> Result<Self> {
        if num_classes == 0 {
            return Err(crate::error::param_err("num_classes must be positive"));
        }
        for (i, s) in samples.iter().enumerate() {
            if s.features.len() != feature_dim {
                return Err(Error::Shape {
                    op: "Dataset::new",
                    expected: (1, feature_dim),
                    got: (1, s.features.len()),
                });
            }
            match s.label {
                Some(c) if c >= num_classes => {
                    return Err(Error::Contract(format!("sample {i}: class {c} >= {num_classes}")));
                }
                None if s.domain.is_source_stream() => {
                    return Err(Error::Contract(format!("sample {i}: {} sample without label", s.domain)));
                }
                _ => {}
            }
        }
        Ok(Self { name: name.into(), num_classes, feature_dim, samples })
    }

    pub fn samples(&self) -> &[LabeledSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn features(&self) -> Matrix {
        let mut data = Vec::with_capacity(self.len() * self.feature_dim);
        for s in &self.samples {
            data.extend_from_slice(&s.features);
        }
        Matrix::from_vec(self.len(), self.feature_dim, data).expect("validated dimensions")
    }

    pub fn labels(&self) -> Vec<Option<usize>> {
        self.samples.iter().map(|s| s.label).collect()
    }

    /// Retags every sample. Retagging unlabeled rows as a source domain fails.
    pub fn with_domain(&self, domain: Domain) -> Result<Dataset> {
        let samples = self
            .samples
            .iter()
            .map(|s| LabeledSample { domain, ..s.clone() })
            .collect();
        Dataset::new(self.name.clone(), self.num_classes, self.feature_dim, samples)
    }

    pub fn renamed(mut self, name: impl Into<String>) -> Dataset {
        self.name = name.into();
        self
    }

    /// The source-stream view. Every row must be labeled and not tagged `Target`.
    pub fn labeled_pool(&self) -> Result<LabeledPool> {
        let mut labels = Vec::with_capacity(self.len());
        let mut domains = Vec::with_capacity(self.len());
        for (i, s) in self.samples.iter().enumerate() {
            if !s.domain.is_source_stream() {
                return Err(Error::Contract(format!("sample {i} is a target sample, not labeled data")));
            }
            labels.push(s.label.ok_or_else(|| Error::Contract(format!("sample {i} has no label")))?);
            domains.push(s.domain);
        }
        Ok(LabeledPool { features: self.features(), labels, domains, num_classes: self.num_classes })
    }

    /// Separates the trainer-facing features from the ground truth kept for evaluation.
    pub fn split_target(&self) -> (TargetPool, TargetTruth) {
        let pool = TargetPool { features: self.features(), num_classes: self.num_classes };
        (pool, TargetTruth::new(self.labels(), self.num_classes))
    }
}

/// Labeled training pool (`D_s` or the expanded `D'_s`) in matrix form.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPool {
    pub features: Matrix,
    pub labels: Vec<usize>,
    pub domains: Vec<Domain>,
    pub num_classes: usize,
}

impl LabeledPool {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn pseudo_count(&self) -> usize {
        self.domains.iter().filter(|&&d| d == Domain::PseudoSource).count()
    }
}

/// Target features with every label withheld.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetPool {
    pub features: Matrix,
    pub num_classes: usize,
}

impl TargetPool {
    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Overall and class-averaged accuracy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Accuracy {
    pub overall: f64,
    /// Mean of per-class recall over classes that occur in the ground truth.
    pub per_class: f64,
    /// Number of rows with known ground truth that were scored.
    pub scored: usize,
}

/// Target ground truth behind a read-counting accessor.
///
/// Reads made inside an [`EvalScope`] count as evaluation reads; any other
/// read is recorded as unscoped. Training and selection code never holds a
/// `TargetTruth`, so after an experiment the unscoped counter must read zero.
#[derive(Debug)]
pub struct TargetTruth {
    labels: Vec<Option<usize>>,
    num_classes: usize,
    scope_depth: AtomicUsize,
    eval_reads: AtomicUsize,
    unscoped_reads: AtomicUsize,
}

pub struct EvalScope<'a> {
    truth: &'a TargetTruth,
}

impl Drop for EvalScope<'_> {
    fn drop(&mut self) {
        self.truth.scope_depth.fetch_sub(1, Ordering::SeqCst);
    }
}

impl TargetTruth {
    pub fn new(labels: Vec<Option<usize>>, num_classes: usize) -> Self {
        Self {
            labels,
            num_classes,
            scope_depth: AtomicUsize::new(0),
            eval_reads: AtomicUsize::new(0),
            unscoped_reads: AtomicUsize::new(0),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn evaluation(&self) -> EvalScope<'_> {
        self.scope_depth.fetch_add(1, Ordering::SeqCst);
        EvalScope { truth: self }
    }

    /// Ground truth of target sample `i`. Counted.
    pub fn label(&self, i: usize) -> Option<usize> {
        if self.scope_depth.load(Ordering::SeqCst) > 0 {
            self.eval_reads.fetch_add(1, Ordering::Relaxed);
        } else {
            self.unscoped_reads.fetch_add(1, Ordering::Relaxed);
        }
        self.labels[i]
    }

    pub fn eval_reads(&self) -> usize {
        self.eval_reads.load(Ordering::SeqCst)
    }

    pub fn unscoped_reads(&self) -> usize {
        self.unscoped_reads.load(Ordering::SeqCst)
    }

    /// Accuracy of `predictions[j]` for target rows `indices[j]`.
    pub fn accuracy_of(&self, indices: &[usize], predictions: &[usize]) -> Accuracy {
        assert_eq!(indices.len(), predictions.len());
        let _scope = self.evaluation();
        let mut hits = 0usize;
        let mut scored = 0usize;
        let mut class_total = alloc::vec![0usize; self.num_classes];
        let mut class_hits = alloc::vec![0usize; self.num_classes];
        for (&i, &pred) in indices.iter().zip(predictions) {
            let Some(truth) = self.label(i) else { continue };
            scored += 1;
            class_total[truth] += 1;
            if truth == pred {
                hits += 1;
                class_hits[truth] += 1;
            }
        }
        let present: Vec<f64> = class_total
            .iter()
            .zip(&class_hits)
            .filter(|(&t, _)| t > 0)
            .map(|(&t, &h)| h as f64 / t as f64)
            .collect();
        let ratio = |num: f64, den: usize| if den == 0 { 0.0 } else { num / den as f64 };
        Accuracy {
            overall: ratio(hits as f64, scored),
            per_class: ratio(present.iter().sum(), present.len()),
            scored,
        }
    }

    /// Accuracy of a full prediction vector over all target rows.
    pub fn accuracy(&self, predictions: &[usize]) -> Accuracy {
        let indices: Vec<usize> = (0..predictions.len()).collect();
        self.accuracy_of(&indices, predictions)
    }
}
