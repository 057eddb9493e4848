use alloc::vec::Vec;

use crate::diffcore::{cosine, Matrix};
use crate::{Error, Result};

/// Indices of the `m` rows most cosine-similar to row `i` (self excluded),
/// ties broken by lower index.
pub(crate) fn nearest_by_cosine(features: &Matrix, i: usize, m: usize) -> Vec<usize> {
    let mut scored: Vec<(f64, usize)> = (0..features.rows())
        .filter(|&j| j != i)
        .map(|j| (1.0 - cosine(features.row(i), features.row(j)), j))
        .collect();
    let m = m.min(scored.len());
    if m < scored.len() {
        scored.select_nth_unstable_by(m, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        scored.truncate(m);
    }
    scored.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    scored.into_iter().map(|(_, j)| j).collect()
}

/// Neighborhood aggregation: the mean class distribution of each target
/// sample's `m` nearest other target samples in feature space.
pub fn neighborhood_scores(target_features: &Matrix, target_probs: &Matrix, m: usize) -> Result<Matrix> {
    if m == 0 {
        return Err(crate::error::param_err("neighborhood size must be positive"));
    }
    let n = target_features.rows();
    if target_probs.rows() != n {
        return Err(Error::Shape {
            op: "neighborhood_scores",
            expected: (n, target_probs.cols()),
            got: target_probs.shape(),
        });
    }
    if n > 0 && m > n - 1 {
        return Err(crate::error::param_err(alloc::format!("m = {m} needs at least {} target samples", m + 1)));
    }
    let mut out = Matrix::zeros(n, target_probs.cols());
    for i in 0..n {
        let row = out.row_mut(i);
        for j in nearest_by_cosine(target_features, i, m) {
            row.iter_mut().zip(target_probs.row(j)).for_each(|(o, p)| *o += p);
        }
        row.iter_mut().for_each(|v| *v /= m as f64);
    }
    Ok(out)
}
