use alloc::vec;
use alloc::vec::Vec;

use crate::diffcore::{norm, Matrix};
use crate::error::param_err;
use crate::math::sqrt;
use crate::{Error, Result};

/// Where target rows of the propagation anchor come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TargetAnchor {
    /// Classifier probabilities.
    #[default]
    Probs,
    /// All-zero rows; targets receive mass only through the graph.
    Zero,
}

/// Sparse symmetric affinity graph with nonnegative weights.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityGraph {
    adjacency: Vec<Vec<(usize, f64)>>,
    degree: Vec<f64>,
}

impl AffinityGraph {
    /// Mutual k-nearest-neighbor graph under cosine similarity. An edge joins
    /// `i` and `j` when each is among the other's `k` nearest rows; its
    /// weight is the cosine similarity clamped at zero.
    pub fn mutual_knn(features: &Matrix, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(param_err("graph neighbor count must be positive"));
        }
        let n = features.rows();
        let unit: Vec<Vec<f64>> = features
            .row_iter()
            .map(|r| {
                let l = norm(r);
                if l > 0.0 { r.iter().map(|v| v / l).collect() } else { vec![0.0; r.len()] }
            })
            .collect();
        let mut knn: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);
        let mut sims: Vec<(f64, usize)> = Vec::with_capacity(n);
        for i in 0..n {
            sims.clear();
            for j in (0..n).filter(|&j| j != i) {
                let s: f64 = unit[i].iter().zip(&unit[j]).map(|(a, b)| a * b).sum();
                sims.push((1.0 - s, j));
            }
            let kk = k.min(sims.len());
            let order = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
            if kk < sims.len() {
                sims.select_nth_unstable_by(kk, order);
            }
            let mut near: Vec<(usize, f64)> = sims[..kk].iter().map(|&(d, j)| (j, 1.0 - d)).collect();
            near.sort_unstable_by_key(|e| e.0);
            knn.push(near);
        }
        let mut adjacency = vec![Vec::new(); n];
        for i in 0..n {
            for &(j, s) in &knn[i] {
                if knn[j].binary_search_by_key(&i, |e| e.0).is_ok() && s > 0.0 {
                    adjacency[i].push((j, s));
                }
            }
        }
        Ok(Self::from_adjacency(adjacency))
    }

    /// Graph from a dense symmetric nonnegative weight matrix; the diagonal
    /// is ignored.
    pub fn from_dense(weights: &Matrix) -> Result<Self> {
        let n = weights.rows();
        weights.ensure_shape("AffinityGraph::from_dense", n, n)?;
        let mut adjacency = vec![Vec::new(); n];
        for i in 0..n {
            for j in 0..n {
                let w = weights[(i, j)];
                if !(w >= 0.0) || (w - weights[(j, i)]).abs() > 1e-12 {
                    return Err(param_err("affinity must be symmetric and nonnegative"));
                }
                if i != j && w > 0.0 {
                    adjacency[i].push((j, w));
                }
            }
        }
        Ok(Self::from_adjacency(adjacency))
    }

    fn from_adjacency(adjacency: Vec<Vec<(usize, f64)>>) -> Self {
        let degree = adjacency.iter().map(|row| row.iter().map(|e| e.1).sum()).collect();
        Self { adjacency, degree }
    }

    pub fn len(&self) -> usize {
        self.adjacency.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adjacency.is_empty()
    }

    /// Weighted neighbors of node `i`.
    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.adjacency[i]
    }

    pub fn degree(&self, i: usize) -> f64 {
        self.degree[i]
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// `out = (I + λ L_sym) x` for one column. Isolated nodes have a zero
    /// Laplacian row.
    fn apply(&self, lambda: f64, x: &[f64], out: &mut [f64]) {
        for i in 0..x.len() {
            let d = self.degree[i];
            let mut v = x[i];
            if d > 0.0 {
                let mut spread = 0.0;
                for &(j, w) in &self.adjacency[i] {
                    spread += w * x[j] / sqrt(self.degree[j]);
                }
                v += lambda * (x[i] - spread / sqrt(d));
            }
            out[i] = v;
        }
    }

    /// `(I + λ L_sym) X` for a full matrix.
    pub fn system_product(&self, lambda: f64, x: &Matrix) -> Result<Matrix> {
        x.ensure_shape("AffinityGraph::system_product", self.len(), x.cols())?;
        let mut out = Matrix::zeros(x.rows(), x.cols());
        let (mut col, mut res) = (vec![0.0; x.rows()], vec![0.0; x.rows()]);
        for c in 0..x.cols() {
            (0..x.rows()).for_each(|r| col[r] = x[(r, c)]);
            self.apply(lambda, &col, &mut res);
            (0..x.rows()).for_each(|r| out.row_mut(r)[c] = res[r]);
        }
        Ok(out)
    }
}

/// Conjugate gradient on `(I + λ L_sym) x = b`, to relative residual `tol`.
fn conjugate_gradient(graph: &AffinityGraph, lambda: f64, b: &[f64], tol: f64) -> Result<Vec<f64>> {
    let n = b.len();
    let dot = |a: &[f64], c: &[f64]| a.iter().zip(c).map(|(x, y)| x * y).sum::<f64>();
    let target = tol * sqrt(dot(b, b));
    let mut x = b.to_vec();
    let mut ax = vec![0.0; n];
    graph.apply(lambda, &x, &mut ax);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    let mut ap = vec![0.0; n];
    for _ in 0..(10 * n + 100) {
        if sqrt(rr) <= target {
            return Ok(x);
        }
        graph.apply(lambda, &p, &mut ap);
        let alpha = rr / dot(&p, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let next = dot(&r, &r);
        let beta = next / rr;
        rr = next;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }
    // recompute the true residual before giving up
    graph.apply(lambda, &x, &mut ax);
    let true_res = sqrt(b.iter().zip(&ax).map(|(bi, ai)| (bi - ai) * (bi - ai)).sum::<f64>());
    if true_res <= target {
        Ok(x)
    } else {
        Err(Error::Contract(alloc::format!("conjugate gradient stalled at residual {true_res:e}")))
    }
}

/// Solve `(I + λ L_sym) P = anchors` column by column, without renormalizing.
pub fn propagate(graph: &AffinityGraph, lambda: f64, anchors: &Matrix) -> Result<Matrix> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(param_err("propagation lambda must be finite and nonnegative"));
    }
    anchors.ensure_shape("propagate", graph.len(), anchors.cols())?;
    let n = anchors.rows();
    let mut out = Matrix::zeros(n, anchors.cols());
    let mut col = vec![0.0; n];
    for c in 0..anchors.cols() {
        (0..n).for_each(|r| col[r] = anchors[(r, c)]);
        let x = if lambda == 0.0 { col.clone() } else { conjugate_gradient(graph, lambda, &col, 1e-12)? };
        (0..n).for_each(|r| out.row_mut(r)[c] = x[r]);
    }
    Ok(out)
}

/// Clamp each row at zero and rescale it to sum to one; all-zero rows become
/// uniform.
pub fn renormalize_rows(m: &mut Matrix) {
    let k = m.cols();
    for row in m.as_mut_slice().chunks_mut(k.max(1)) {
        row.iter_mut().for_each(|v| *v = v.max(0.0));
        let s: f64 = row.iter().sum();
        if s > 0.0 {
            row.iter_mut().for_each(|v| *v /= s);
        } else {
            row.iter_mut().for_each(|v| *v = 1.0 / k as f64);
        }
    }
}

/// Label propagation over the union of source and target samples. Rows of
/// `all_features` are the source samples followed by the target samples.
/// Returns the renormalized target rows.
pub fn label_propagation(
    all_features: &Matrix,
    source_labels: &[usize],
    target_probs: &Matrix,
    lambda: f64,
    num_neighbors: usize,
    target_anchor: TargetAnchor,
) -> Result<Matrix> {
    let (ns, nt, k) = (source_labels.len(), target_probs.rows(), target_probs.cols());
    if all_features.rows() != ns + nt {
        return Err(Error::Shape {
            op: "label_propagation",
            expected: (ns + nt, all_features.cols()),
            got: all_features.shape(),
        });
    }
    if let Some(&bad) = source_labels.iter().find(|&&y| y >= k) {
        return Err(param_err(alloc::format!("source label {bad} out of range for {k} classes")));
    }
    let mut anchors = Matrix::zeros(ns + nt, k);
    for (i, &y) in source_labels.iter().enumerate() {
        anchors.row_mut(i)[y] = 1.0;
    }
    if target_anchor == TargetAnchor::Probs {
        for i in 0..nt {
            anchors.row_mut(ns + i).copy_from_slice(target_probs.row(i));
        }
    }
    let graph = AffinityGraph::mutual_knn(all_features, num_neighbors)?;
    let solved = propagate(&graph, lambda, &anchors)?;
    let mut targets = solved.slice_rows(ns, ns + nt);
    renormalize_rows(&mut targets);
    Ok(targets)
}
