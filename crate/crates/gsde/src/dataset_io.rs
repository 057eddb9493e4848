//! Dataset CSV files.
//!
//! One header row `f0,…,f{d-1},label,domain`, then one row per sample.
//! `label` is empty for target rows without ground truth; `domain` is one of
//! `source`, `target`, `pseudo`. Values are written with 17 significant
//! digits, so a save/load round trip is exact.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use gsde_core::data::{Dataset, Domain, LabeledSample};

use crate::error::{GsdeError, Result};

/// Formats a float with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_dataset<W: Write>(d: &Dataset, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (0..d.feature_dim).map(|i| format!("f{i}")).collect();
    header.push("label".into());
    header.push("domain".into());
    w.write_record(&header)?;
    for s in d.samples() {
        let mut row: Vec<String> = s.features.iter().map(|&v| fmt_f64(v)).collect();
        row.push(s.label.map_or_else(String::new, |l| l.to_string()));
        row.push(s.domain.tag().into());
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| GsdeError::io("<dataset>", e))?;
    Ok(())
}

pub fn save_csv(d: &Dataset, path: &Path) -> Result<()> {
    let f = File::create(path).map_err(|e| GsdeError::io(path, e))?;
    write_dataset(d, f)
}

/// Parses a dataset. `num_classes` defaults to one more than the largest
/// label present (at least 1); `origin` names the source in error messages.
pub fn read_dataset<R: Read>(input: R, name: &str, num_classes: Option<usize>, origin: &Path) -> Result<Dataset> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = r.headers().map_err(|e| GsdeError::parse(origin, 1, e.to_string()))?.clone();
    let cols: Vec<&str> = header.iter().collect();
    let dim = cols.len().checked_sub(2).ok_or_else(|| GsdeError::parse(origin, 1, "header needs label and domain"))?;
    for (i, c) in cols[..dim].iter().enumerate() {
        if *c != format!("f{i}") {
            return Err(GsdeError::parse(origin, 1, format!("expected column f{i}, found {c:?}")));
        }
    }
    if cols[dim] != "label" || cols[dim + 1] != "domain" {
        return Err(GsdeError::parse(origin, 1, "last two columns must be label,domain"));
    }

    let mut samples = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            GsdeError::parse(origin, line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let bad = |m: String| GsdeError::parse(origin, line, m);
        if rec.len() != dim + 2 {
            return Err(bad(format!("expected {} fields, found {}", dim + 2, rec.len())));
        }
        let features = rec
            .iter()
            .take(dim)
            .map(|v| v.trim().parse::<f64>().map_err(|e| bad(format!("feature {v:?}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        let label = match rec[dim].trim() {
            "" => None,
            v => Some(v.parse::<usize>().map_err(|e| bad(format!("label {v:?}: {e}")))?),
        };
        let domain = Domain::from_tag(rec[dim + 1].trim())
            .ok_or_else(|| bad(format!("unknown domain tag {:?}", &rec[dim + 1])))?;
        if label.is_none() && domain.is_source_stream() {
            return Err(bad(format!("{domain} row without a label")));
        }
        samples.push(LabeledSample { features, label, domain });
    }
    let inferred = samples.iter().filter_map(|s| s.label).max().map_or(1, |m| m + 1);
    let k = num_classes.unwrap_or(inferred);
    Dataset::new(name, k, dim, samples).map_err(|e| GsdeError::parse(origin, 0, e.to_string()))
}

/// Loads a dataset file; the dataset is named after the file stem.
pub fn load_csv(path: &Path, num_classes: Option<usize>) -> Result<Dataset> {
    let f = File::open(path).map_err(|e| GsdeError::io(path, e))?;
    let name = path.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned());
    read_dataset(f, &name, num_classes, path)
}
