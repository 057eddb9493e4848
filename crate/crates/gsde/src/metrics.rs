//! Metrics and summary CSV files.

use std::io::{Read, Write};
use std::path::Path;

use gsde_core::driver::RunRecord;

use crate::error::{GsdeError, Result};

pub const METRICS_HEADER: [&str; 10] = [
    "experiment",
    "seed",
    "run",
    "iteration",
    "target_accuracy",
    "per_class_accuracy",
    "mean_disc_src",
    "mean_disc_tgt",
    "expansion_size",
    "pseudo_accuracy",
];

pub const SUMMARY_HEADER: [&str; 8] =
    ["experiment", "seed", "run", "expansion_size", "pseudo_accuracy", "final_accuracy", "final_per_class", "status"];

/// One evaluation checkpoint of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub experiment: String,
    pub seed: u64,
    pub run: usize,
    pub iteration: usize,
    pub target_accuracy: Option<f64>,
    pub per_class_accuracy: Option<f64>,
    pub mean_disc_src: f64,
    pub mean_disc_tgt: f64,
    pub expansion_size: usize,
    pub pseudo_accuracy: Option<f64>,
}

/// The final state of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub experiment: String,
    pub seed: u64,
    pub run: usize,
    pub expansion_size: usize,
    pub pseudo_accuracy: Option<f64>,
    pub final_accuracy: Option<f64>,
    pub final_per_class: Option<f64>,
    pub status: String,
}

pub fn metrics_rows(experiment: &str, seed: u64, record: &RunRecord) -> Vec<MetricsRow> {
    record
        .trace
        .iter()
        .map(|p| MetricsRow {
            experiment: experiment.to_string(),
            seed,
            run: record.run,
            iteration: p.iteration,
            target_accuracy: p.accuracy.map(|a| a.overall),
            per_class_accuracy: p.accuracy.map(|a| a.per_class),
            mean_disc_src: p.disc_source,
            mean_disc_tgt: p.disc_target,
            expansion_size: record.expansion_size,
            pseudo_accuracy: record.pseudo_accuracy,
        })
        .collect()
}

pub fn summary_row(experiment: &str, seed: u64, record: &RunRecord) -> SummaryRow {
    SummaryRow {
        experiment: experiment.to_string(),
        seed,
        run: record.run,
        expansion_size: record.expansion_size,
        pseudo_accuracy: record.pseudo_accuracy,
        final_accuracy: record.final_accuracy.map(|a| a.overall),
        final_per_class: record.final_accuracy.map(|a| a.per_class),
        status: record.failure.clone().map_or_else(|| "ok".into(), |f| format!("failed: {f}")),
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

pub fn write_metrics<W: Write>(rows: &[MetricsRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(METRICS_HEADER)?;
    for r in rows {
        w.write_record([
            r.experiment.clone(),
            r.seed.to_string(),
            r.run.to_string(),
            r.iteration.to_string(),
            opt(r.target_accuracy),
            opt(r.per_class_accuracy),
            r.mean_disc_src.to_string(),
            r.mean_disc_tgt.to_string(),
            r.expansion_size.to_string(),
            opt(r.pseudo_accuracy),
        ])?;
    }
    w.flush().map_err(|e| GsdeError::io("<metrics>", e))?;
    Ok(())
}

pub fn write_summary<W: Write>(rows: &[SummaryRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUMMARY_HEADER)?;
    for r in rows {
        w.write_record([
            r.experiment.clone(),
            r.seed.to_string(),
            r.run.to_string(),
            r.expansion_size.to_string(),
            opt(r.pseudo_accuracy),
            opt(r.final_accuracy),
            opt(r.final_per_class),
            r.status.clone(),
        ])?;
    }
    w.flush().map_err(|e| GsdeError::io("<summary>", e))?;
    Ok(())
}

/// Reads a metrics file. The header must match [`METRICS_HEADER`] exactly.
pub fn read_metrics<R: Read>(input: R, origin: &Path) -> Result<Vec<MetricsRow>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(|e| GsdeError::parse(origin, 1, e.to_string()))?.clone();
    for (i, col) in header.iter().enumerate() {
        if METRICS_HEADER.get(i) != Some(&col) {
            return Err(GsdeError::parse(origin, 1, format!("unknown column {col:?}")));
        }
    }
    if header.len() != METRICS_HEADER.len() {
        return Err(GsdeError::parse(origin, 1, "missing metrics columns"));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| GsdeError::parse(origin, e.position().map_or(0, |p| p.line() as usize), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let field = |i: usize| rec.get(i).unwrap_or("");
        let num = |i: usize| -> Result<f64> {
            field(i).parse().map_err(|e| GsdeError::parse(origin, line, format!("{}: {e}", METRICS_HEADER[i])))
        };
        let int = |i: usize| -> Result<u64> {
            field(i).parse().map_err(|e| GsdeError::parse(origin, line, format!("{}: {e}", METRICS_HEADER[i])))
        };
        let maybe = |i: usize| -> Result<Option<f64>> { if field(i).is_empty() { Ok(None) } else { num(i).map(Some) } };
        rows.push(MetricsRow {
            experiment: field(0).to_string(),
            seed: int(1)?,
            run: int(2)? as usize,
            iteration: int(3)? as usize,
            target_accuracy: maybe(4)?,
            per_class_accuracy: maybe(5)?,
            mean_disc_src: num(6)?,
            mean_disc_tgt: num(7)?,
            expansion_size: int(8)? as usize,
            pseudo_accuracy: maybe(9)?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(run: usize, it: usize) -> MetricsRow {
        MetricsRow {
            experiment: "e".into(),
            seed: 4,
            run,
            iteration: it,
            target_accuracy: Some(0.75),
            per_class_accuracy: Some(0.5),
            mean_disc_src: 0.25,
            mean_disc_tgt: 0.125,
            expansion_size: 10,
            pseudo_accuracy: None,
        }
    }

    #[test]
    fn metrics_round_trip() {
        let rows = vec![row(1, 0), row(1, 50), row(2, 0)];
        let mut buf = Vec::new();
        write_metrics(&rows, &mut buf).unwrap();
        assert_eq!(read_metrics(buf.as_slice(), Path::new("m")).unwrap(), rows);
    }

    #[test]
    fn unknown_column_is_a_parse_error() {
        let text = "experiment,seed,run,iteration,target_accuracy,colour\n";
        assert!(matches!(read_metrics(text.as_bytes(), Path::new("m")), Err(GsdeError::Parse { line: 1, .. })));
    }
}
