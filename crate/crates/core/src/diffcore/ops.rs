//! Activations and pointwise losses.
//!
//! Every logarithm is taken of a probability clamped to [`PROB_FLOOR`], so no
//! loss here can produce NaN from a saturated prediction.

use alloc::vec::Vec;

use super::Matrix;
use crate::math::{exp, ln};
use crate::{Error, Result};

pub const PROB_FLOOR: f64 = 1e-12;

#[inline]
pub fn safe_ln(p: f64) -> f64 {
    ln(p.max(PROB_FLOOR))
}

pub fn relu_forward(x: &Matrix) -> Matrix {
    x.map(|v| v.max(0.0))
}

/// Gradient through ReLU given the pre-activation input.
pub fn relu_backward(pre: &Matrix, upstream: &Matrix) -> Result<Matrix> {
    upstream.ensure_shape("relu_backward", pre.rows(), pre.cols())?;
    let mut out = upstream.clone();
    out.as_mut_slice()
        .iter_mut()
        .zip(pre.as_slice())
        .for_each(|(g, &z)| {
            if z <= 0.0 {
                *g = 0.0;
            }
        });
    Ok(out)
}

/// Row-wise softmax with max subtraction.
pub fn softmax(logits: &Matrix) -> Matrix {
    let mut out = logits.clone();
    for i in 0..out.rows() {
        softmax_in_place(out.row_mut(i));
    }
    out
}

pub fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = exp(*v - max);
        sum += *v;
    }
    row.iter_mut().for_each(|v| *v /= sum);
}

/// Pulls `dL/dp` back through softmax: `dz = p ⊙ (dp - <dp, p>)`.
pub fn softmax_backward(probs: &Matrix, d_probs: &Matrix) -> Result<Matrix> {
    d_probs.ensure_shape("softmax_backward", probs.rows(), probs.cols())?;
    let mut out = Matrix::zeros(probs.rows(), probs.cols());
    for i in 0..probs.rows() {
        let p = probs.row(i);
        let dp = d_probs.row(i);
        let inner: f64 = p.iter().zip(dp).map(|(a, b)| a * b).sum();
        out.row_mut(i)
            .iter_mut()
            .zip(p.iter().zip(dp))
            .for_each(|(o, (pv, dv))| *o = pv * (dv - inner));
    }
    Ok(out)
}

/// Mean over rows of `-Σ_c t_c ln p_c`. `targets` may be one-hot or soft.
pub fn cross_entropy(probs: &Matrix, targets: &Matrix) -> Result<f64> {
    targets.ensure_shape("cross_entropy", probs.rows(), probs.cols())?;
    if probs.rows() == 0 {
        return Ok(0.0);
    }
    let total: f64 = probs
        .as_slice()
        .iter()
        .zip(targets.as_slice())
        .filter(|(_, &t)| t != 0.0)
        .map(|(&p, &t)| -t * safe_ln(p))
        .sum();
    Ok(total / probs.rows() as f64)
}

/// Gradient of [`cross_entropy`] with respect to the softmax logits, for
/// target rows that sum to one: `(p - t) / rows`.
pub fn cross_entropy_logit_grad(probs: &Matrix, targets: &Matrix) -> Result<Matrix> {
    targets.ensure_shape("cross_entropy_logit_grad", probs.rows(), probs.cols())?;
    let n = probs.rows().max(1) as f64;
    let mut g = probs.clone();
    g.axpy(-1.0, targets)?;
    g.scale(1.0 / n);
    Ok(g)
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + exp(-z))
    } else {
        let e = exp(z);
        e / (1.0 + e)
    }
}

/// Binary cross-entropy of a probability against a 0/1 label.
#[inline]
pub fn bce(prob: f64, label: f64) -> f64 {
    -(label * safe_ln(prob) + (1.0 - label) * safe_ln(1.0 - prob))
}

/// Mean [`bce`] over a column of logits; returns the loss and `dL/dz`.
pub fn bce_with_logits(logits: &Matrix, labels: &[f64]) -> Result<(f64, Matrix)> {
    logits.ensure_shape("bce_with_logits", labels.len(), 1)?;
    let n = labels.len().max(1) as f64;
    let mut loss = 0.0;
    let mut grad = Matrix::zeros(labels.len(), 1);
    for (i, (&z, &y)) in logits.as_slice().iter().zip(labels).enumerate() {
        let p = sigmoid(z);
        loss += bce(p, y);
        grad[(i, 0)] = (p - y) / n;
    }
    Ok((loss / n, grad))
}

/// Checks that every row of `m` is a probability vector within `tol`.
pub fn check_simplex(m: &Matrix, tol: f64, what: &str) -> Result<()> {
    for (i, row) in m.row_iter().enumerate() {
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > tol || row.iter().any(|&v| v < -tol || !v.is_finite()) {
            return Err(Error::Contract(alloc::format!("{what} row {i} is not on the simplex (sum {sum})")));
        }
    }
    Ok(())
}

/// Rows of `labels` as one-hot targets, rejecting out-of-range classes.
pub fn one_hot_checked(labels: &[usize], num_classes: usize) -> Result<Matrix> {
    if let Some(&bad) = labels.iter().find(|&&c| c >= num_classes) {
        return Err(Error::Contract(alloc::format!("class {bad} out of range for {num_classes} classes")));
    }
    Ok(Matrix::one_hot(labels, num_classes))
}

/// Row sums, mostly for tests and diagnostics.
pub fn row_sums(m: &Matrix) -> Vec<f64> {
    m.row_iter().map(|r| r.iter().sum()).collect()
}
