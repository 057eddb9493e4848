//! Per-run score dumps: `index,confidence,pseudo_label,p_0,…,p_{K-1}`, where
//! `p_c` is the combined score of class `c`.

use std::io::Write;

use gsde_core::scoring::ScoreTable;

use crate::error::{GsdeError, Result};

pub fn write_scores<W: Write>(table: &ScoreTable, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["index".to_string(), "confidence".into(), "pseudo_label".into()];
    header.extend((0..table.num_classes()).map(|c| format!("p_{c}")));
    w.write_record(&header)?;
    for (i, row) in table.combined.row_iter().enumerate() {
        let mut rec = vec![i.to_string(), table.confidence[i].to_string(), table.pseudo_labels[i].to_string()];
        rec.extend(row.iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| GsdeError::io("<scores>", e))?;
    Ok(())
}
