use alloc::vec::Vec;

use crate::diffcore::ops::{cross_entropy, one_hot_checked};
use crate::diffcore::Matrix;
use crate::{Error, Result};

/// Mean cross-entropy of `probs` against labeled rows.
///
/// Every row must carry a label; a `None` means a target row leaked into a
/// supervised loss and is rejected.
pub fn classification_loss(probs: &Matrix, labels: &[Option<usize>]) -> Result<f64> {
    if labels.len() != probs.rows() {
        return Err(Error::Shape {
            op: "classification_loss",
            expected: (labels.len(), probs.cols()),
            got: probs.shape(),
        });
    }
    let labels: Vec<usize> = labels
        .iter()
        .enumerate()
        .map(|(i, l)| l.ok_or_else(|| Error::Contract(alloc::format!("row {i} has no label"))))
        .collect::<Result<_>>()?;
    cross_entropy(probs, &one_hot_checked(&labels, probs.cols())?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::ln;

    #[test]
    fn perfect_predictions_cost_nothing() {
        let p = Matrix::one_hot(&[0, 1, 1], 2);
        assert!(classification_loss(&p, &[Some(0), Some(1), Some(1)]).unwrap().abs() < 1e-9);
    }

    #[test]
    fn uniform_binary_is_ln2() {
        let p = Matrix::filled(4, 2, 0.5);
        let l = classification_loss(&p, &[Some(0), Some(1), Some(0), Some(1)]).unwrap();
        assert!((l - ln(2.0)).abs() < 1e-12);
    }

    #[test]
    fn three_sample_hand_computation() {
        let p = Matrix::from_rows(&[[0.7, 0.2, 0.1], [0.1, 0.8, 0.1], [0.3, 0.3, 0.4]]).unwrap();
        let expected = -(ln(0.7) + ln(0.8) + ln(0.4)) / 3.0;
        let got = classification_loss(&p, &[Some(0), Some(1), Some(2)]).unwrap();
        assert!((got - expected).abs() < 1e-12);
    }

    #[test]
    fn unlabeled_row_is_a_contract_violation() {
        let p = Matrix::filled(2, 2, 0.5);
        assert!(matches!(classification_loss(&p, &[Some(0), None]), Err(Error::Contract(_))));
    }
}
