//! Long-format figure data: `figure,seed,series,x,y`.
//!
//! * `accuracy_vs_max_runs`: mean final accuracy against the maximum run
//!   count, from a max-runs sweep file.
//! * `final_accuracy_by_run`: final accuracy of every run.
//! * `accuracy_by_iteration`: target accuracy over iterations, one series
//!   per run.
//! * `discriminator_by_iteration`: mean discriminator output over
//!   iterations, a `src` and a `tgt` series per run.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{GsdeError, Result};
use crate::metrics::MetricsRow;

#[derive(Debug, Clone, PartialEq)]
pub struct TidyRow {
    pub figure: &'static str,
    /// Seed, or `mean` for rows aggregated over seeds.
    pub seed: String,
    pub series: String,
    pub x: f64,
    pub y: f64,
}

pub fn tidy_from_metrics(rows: &[MetricsRow]) -> Vec<TidyRow> {
    let mut out = Vec::new();
    // (seed, run) -> row at the last iteration
    let mut last: BTreeMap<(u64, usize), &MetricsRow> = BTreeMap::new();
    for r in rows {
        let e = last.entry((r.seed, r.run)).or_insert(r);
        if r.iteration >= e.iteration {
            *e = r;
        }
    }
    for ((seed, run), r) in &last {
        if let Some(acc) = r.target_accuracy {
            out.push(TidyRow { figure: "final_accuracy_by_run", seed: seed.to_string(), series: "final".into(), x: *run as f64, y: acc });
        }
    }
    for r in rows {
        if let Some(acc) = r.target_accuracy {
            out.push(TidyRow {
                figure: "accuracy_by_iteration",
                seed: r.seed.to_string(),
                series: format!("run{}", r.run),
                x: r.iteration as f64,
                y: acc,
            });
        }
    }
    for r in rows {
        for (side, y) in [("src", r.mean_disc_src), ("tgt", r.mean_disc_tgt)] {
            out.push(TidyRow {
                figure: "discriminator_by_iteration",
                seed: r.seed.to_string(),
                series: format!("run{}_{side}", r.run),
                x: r.iteration as f64,
                y,
            });
        }
    }
    out
}

/// `accuracy_vs_max_runs` rows from a max-runs sweep CSV.
pub fn tidy_from_sweep<R: Read>(input: R, origin: &Path) -> Result<Vec<TidyRow>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(|e| GsdeError::parse(origin, 1, e.to_string()))?.clone();
    let expected = ["axis", "point", "mean_accuracy", "std_accuracy", "seeds"];
    if header.iter().ne(expected) {
        return Err(GsdeError::parse(origin, 1, format!("unexpected sweep columns {:?}", header.iter().collect::<Vec<_>>())));
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if &rec[0] != "max_runs" {
            return Err(GsdeError::parse(origin, line, "accuracy_vs_max_runs needs a max_runs sweep"));
        }
        let num = |i: usize| rec[i].parse::<f64>().map_err(|e| GsdeError::parse(origin, line, e.to_string()));
        out.push(TidyRow { figure: "accuracy_vs_max_runs", seed: "mean".into(), series: "max_runs".into(), x: num(1)?, y: num(2)? });
    }
    Ok(out)
}

pub fn write_tidy<W: Write>(rows: &[TidyRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["figure", "seed", "series", "x", "y"])?;
    for r in rows {
        w.write_record([r.figure.to_string(), r.seed.clone(), r.series.clone(), r.x.to_string(), r.y.to_string()])?;
    }
    w.flush().map_err(|e| GsdeError::io("<plotdata>", e))?;
    Ok(())
}
