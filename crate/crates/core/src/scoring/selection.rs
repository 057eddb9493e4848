use alloc::vec::Vec;

use crate::diffcore::ops::check_simplex;
use crate::diffcore::{argmax, Matrix};
use crate::error::param_err;
use crate::{Error, Result};

/// Per-target score vectors and the pseudo-labels derived from them.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable {
    /// Classifier probabilities.
    pub probs: Matrix,
    /// Neighborhood-aggregated probabilities; `None` when only the classifier
    /// output is used.
    pub neighborhood: Option<Matrix>,
    /// Label-propagated probabilities; `None` when only the classifier
    /// output is used.
    pub propagation: Option<Matrix>,
    /// Mean of the available distributions.
    pub combined: Matrix,
    pub pseudo_labels: Vec<usize>,
    pub confidence: Vec<f64>,
}

impl ScoreTable {
    /// A table scored by the classifier probabilities alone.
    pub fn from_probs(probs: Matrix) -> Result<Self> {
        check_simplex(&probs, 1e-6, "p")?;
        Ok(Self::finish(probs.clone(), None, None, probs))
    }

    fn finish(probs: Matrix, neighborhood: Option<Matrix>, propagation: Option<Matrix>, combined: Matrix) -> Self {
        let pseudo_labels: Vec<usize> = combined.row_iter().map(argmax).collect();
        let confidence = combined.row_iter().zip(&pseudo_labels).map(|(r, &c)| r[c]).collect();
        Self { probs, neighborhood, propagation, combined, pseudo_labels, confidence }
    }

    pub fn len(&self) -> usize {
        self.confidence.len()
    }

    pub fn is_empty(&self) -> bool {
        self.confidence.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.combined.cols()
    }

    /// Checks that every stored distribution lies on the simplex within `tol`.
    pub fn check_simplex(&self, tol: f64) -> Result<()> {
        check_simplex(&self.probs, tol, "p")?;
        if let Some(m) = &self.neighborhood {
            check_simplex(m, tol, "p_na")?;
        }
        if let Some(m) = &self.propagation {
            check_simplex(m, tol, "p_lp")?;
        }
        check_simplex(&self.combined, tol, "p_all")
    }
}

/// `p_all = (p + p_na + p_lp) / 3`.
pub fn combined_scores(p: &Matrix, p_na: &Matrix, p_lp: &Matrix) -> Result<ScoreTable> {
    for (m, op) in [(p_na, "combined_scores (p_na)"), (p_lp, "combined_scores (p_lp)")] {
        if m.shape() != p.shape() {
            return Err(Error::Shape { op, expected: p.shape(), got: m.shape() });
        }
    }
    for (m, what) in [(p, "p"), (p_na, "p_na"), (p_lp, "p_lp")] {
        check_simplex(m, 1e-6, what)?;
    }
    let mut all = p.clone();
    all.add_assign(p_na)?;
    all.add_assign(p_lp)?;
    all.scale(1.0 / 3.0);
    Ok(ScoreTable::finish(p.clone(), Some(p_na.clone()), Some(p_lp.clone()), all))
}

/// Target indices ordered by descending confidence, ties by lower index.
pub fn confidence_order(table: &ScoreTable) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..table.len()).collect();
    idx.sort_by(|&a, &b| table.confidence[b].total_cmp(&table.confidence[a]).then(a.cmp(&b)));
    idx
}

/// The `count` most confident targets as `(index, pseudo_label)` pairs.
pub fn select_top(table: &ScoreTable, count: usize) -> Vec<(usize, usize)> {
    let mut order = confidence_order(table);
    order.truncate(count.min(table.len()));
    order.into_iter().map(|i| (i, table.pseudo_labels[i])).collect()
}

/// Number of samples a fraction of `n` selects. Products that land within
/// round-off of an integer count as that integer, so `(2.0 / 7.0) * 7` is 2.
pub fn fraction_count(fraction: f64, n: usize) -> usize {
    let raw = fraction * n as f64;
    let nearest = crate::math::round(raw);
    let count = if (raw - nearest).abs() <= 1e-9 * raw.abs().max(1.0) { nearest } else { crate::math::floor(raw) };
    (count.max(0.0) as usize).min(n)
}

/// The `floor(fraction · n_t)` most confident targets.
pub fn select_top_fraction(table: &ScoreTable, fraction: f64) -> Result<Vec<(usize, usize)>> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(param_err(alloc::format!("selection fraction {fraction} outside [0, 1]")));
    }
    Ok(select_top(table, fraction_count(fraction, table.len())))
}

/// Size of the expansion set for run `n` of `max_runs`:
/// `floor((n - 1) / max_runs · n_t)`, computed in integers.
pub fn expansion_size(n: usize, max_runs: usize, n_t: usize) -> Result<usize> {
    if max_runs == 0 || n == 0 || n > max_runs {
        return Err(param_err(alloc::format!("run {n} outside 1..={max_runs}")));
    }
    Ok((n - 1) * n_t / max_runs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(rows: &[[f64; 2]]) -> ScoreTable {
        ScoreTable::from_probs(Matrix::from_rows(rows).unwrap()).unwrap()
    }

    #[test]
    fn mean_of_three() {
        let p = Matrix::from_rows(&[[1.0, 0.0]]).unwrap();
        let na = Matrix::from_rows(&[[0.0, 1.0]]).unwrap();
        let lp = Matrix::from_rows(&[[0.5, 0.5]]).unwrap();
        let t = combined_scores(&p, &na, &lp).unwrap();
        assert!((t.combined[(0, 0)] - 0.5).abs() < 1e-15 && (t.combined[(0, 1)] - 0.5).abs() < 1e-15);
        assert_eq!(t.pseudo_labels, [0]);
    }

    #[test]
    fn one_hot_agreement_has_full_confidence() {
        let e = Matrix::from_rows(&[[0.0, 1.0, 0.0]]).unwrap();
        let t = combined_scores(&e, &e, &e).unwrap();
        assert_eq!(t.pseudo_labels, [1]);
        assert_eq!(t.confidence, [1.0]);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let a = Matrix::filled(2, 2, 0.5);
        let b = Matrix::filled(3, 2, 0.5);
        assert!(matches!(combined_scores(&a, &b, &a), Err(Error::Shape { .. })));
    }

    #[test]
    fn ties_prefer_lower_index() {
        let t = table(&[[0.6, 0.4], [0.9, 0.1], [0.4, 0.6], [0.1, 0.9]]);
        assert_eq!(select_top(&t, 3), [(1, 0), (3, 1), (0, 0)]);
        assert_eq!(select_top_fraction(&t, 0.0).unwrap(), []);
        assert_eq!(select_top_fraction(&t, 1.0).unwrap().len(), 4);
        assert!(select_top_fraction(&t, 1.5).is_err());
    }

    #[test]
    fn four_of_ten_at_two_fifths() {
        let rows: Vec<[f64; 2]> = (0..10).map(|i| [0.5 + i as f64 / 40.0, 0.5 - i as f64 / 40.0]).collect();
        let t = table(&rows);
        assert_eq!(select_top_fraction(&t, 2.0 / 5.0).unwrap().len(), 4);
        assert_eq!(expansion_size(3, 5, 10).unwrap(), 4);
    }

    #[test]
    fn fraction_count_snaps_round_off() {
        for n in 1..=8usize {
            for k in 0..=n {
                assert_eq!(fraction_count(k as f64 / n as f64, n), k);
            }
        }
        assert_eq!(fraction_count(0.5, 7), 3);
    }
}
