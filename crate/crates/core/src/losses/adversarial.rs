use alloc::vec::Vec;

use crate::diffcore::ops::bce_with_logits;
use crate::diffcore::Matrix;
use crate::model::{grl_backward, multilinear, multilinear_backward, GsdeModel};
use crate::Result;

/// Domain label of source-stream rows (source and pseudo-source).
pub const SOURCE_DOMAIN: f64 = 1.0;
pub const TARGET_DOMAIN: f64 = 0.0;

/// Loss value and the gradients reaching the classification path.
#[derive(Debug, Clone)]
pub struct AdversarialGrads {
    pub loss: f64,
    /// Reversed gradient w.r.t. the features, one row per input row.
    pub d_features: Matrix,
    /// Reversed gradient w.r.t. the class probabilities.
    pub d_probs: Matrix,
}

/// Conditional adversarial loss `l_am · BCE(G_d(f ⊗ p), d)` for a stacked
/// batch with per-row domain labels.
///
/// Discriminator gradients are accumulated into `model` as is; the gradients
/// returned for the features and probabilities have passed the reversal
/// layer, i.e. they are multiplied by `-l_am`.
pub fn adversarial_backward(
    model: &mut GsdeModel,
    features: &Matrix,
    probs: &Matrix,
    domain_labels: &[f64],
    l_am: f64,
) -> Result<AdversarialGrads> {
    let fused = multilinear(features, probs)?;
    let cache = model.discriminate(&fused)?;
    let (bce, mut d_logits) = bce_with_logits(&cache.logits, domain_labels)?;
    d_logits.scale(l_am);
    let d_fused = model.discriminator_backward(&cache, &d_logits)?;
    let reversed = grl_backward(&d_fused, l_am);
    let (d_features, d_probs) = multilinear_backward(features, probs, &reversed)?;
    Ok(AdversarialGrads { loss: l_am * bce, d_features, d_probs })
}

/// Value of the adversarial loss for stacked rows.
pub fn adversarial_value(model: &GsdeModel, features: &Matrix, probs: &Matrix, domain_labels: &[f64], l_am: f64) -> Result<f64> {
    let logits = model.domain_logits(&multilinear(features, probs)?)?;
    Ok(l_am * bce_with_logits(&logits, domain_labels)?.0)
}

/// Adversarial loss with source rows labeled 1 and target rows labeled 0.
pub fn adversarial_loss(
    model: &GsdeModel,
    f_src: &Matrix,
    p_src: &Matrix,
    f_tgt: &Matrix,
    p_tgt: &Matrix,
    l_am: f64,
) -> Result<f64> {
    let f = Matrix::vstack(&[f_src, f_tgt])?;
    let p = Matrix::vstack(&[p_src, p_tgt])?;
    adversarial_value(model, &f, &p, &domain_labels(f_src.rows(), f_tgt.rows()), l_am)
}

pub fn domain_labels(n_source: usize, n_target: usize) -> Vec<f64> {
    let mut d = alloc::vec![SOURCE_DOMAIN; n_source];
    d.resize(n_source + n_target, TARGET_DOMAIN);
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffcore::ops::softmax;
    use crate::math::ln;
    use crate::model::{init_model, Dims};
    use crate::rng::seeded;
    use rand::Rng;

    fn setup() -> (GsdeModel, Matrix, Matrix) {
        let dims = Dims { input: 2, hidden: 4, bottleneck: 3, classes: 2, disc_hidden: 5, extractor_depth: 1 };
        let model = init_model(dims, 2, 5).unwrap();
        let mut rng = seeded(1);
        let f = Matrix::from_vec(4, 3, (0..12).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let p = softmax(&Matrix::from_vec(4, 2, (0..8).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap());
        (model, f, p)
    }

    #[test]
    fn zero_lambda_kills_loss_and_feature_gradients() {
        let (mut model, f, p) = setup();
        let g = adversarial_backward(&mut model, &f, &p, &domain_labels(2, 2), 0.0).unwrap();
        assert_eq!(g.loss, 0.0);
        assert!(g.d_features.as_slice().iter().all(|&v| v == 0.0));
        assert!(g.d_probs.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn constant_half_discriminator_gives_scaled_ln2() {
        let (mut model, f, p) = setup();
        model.discriminator[1].weight.fill(0.0);
        model.discriminator[1].bias.fill(0.0);
        let f_s = f.slice_rows(0, 2);
        let f_t = f.slice_rows(2, 4);
        let p_s = p.slice_rows(0, 2);
        let p_t = p.slice_rows(2, 4);
        let l = adversarial_loss(&model, &f_s, &p_s, &f_t, &p_t, 0.3).unwrap();
        assert!((l - 0.3 * ln(2.0)).abs() < 1e-12);
    }

    #[test]
    fn perfect_discriminator_drives_loss_to_floor() {
        let (mut model, f, p) = setup();
        // output layer reads a constant-positive hidden unit; push its bias so
        // source rows saturate at 1, target rows at 0 via the sign of a huge weight
        model.discriminator[0].weight.fill(0.0);
        model.discriminator[0].bias.fill(1.0);
        model.discriminator[1].weight.fill(0.0);
        model.discriminator[1].bias.fill(60.0);
        let l_src = adversarial_value(&model, &f, &p, &[1.0; 4], 1.0).unwrap();
        assert!(l_src >= 0.0 && l_src < 1e-12);
        model.discriminator[1].bias.fill(-60.0);
        let l_tgt = adversarial_value(&model, &f, &p, &[0.0; 4], 1.0).unwrap();
        assert!(l_tgt >= 0.0 && l_tgt < 1e-12);
    }

    #[test]
    fn unit_lambda_reverses_exactly() {
        let (mut model, f, p) = setup();
        let labels = domain_labels(2, 2);
        let mut plain = model.clone();
        let fused = multilinear(&f, &p).unwrap();
        let cache = plain.discriminate(&fused).unwrap();
        let (_, d_logits) = bce_with_logits(&cache.logits, &labels).unwrap();
        let d_fused = plain.discriminator_backward(&cache, &d_logits).unwrap();
        let (df, dp) = multilinear_backward(&f, &p, &d_fused).unwrap();
        let g = adversarial_backward(&mut model, &f, &p, &labels, 1.0).unwrap();
        for (a, b) in g.d_features.as_slice().iter().zip(df.as_slice()) {
            assert_eq!(*a, -*b);
        }
        for (a, b) in g.d_probs.as_slice().iter().zip(dp.as_slice()) {
            assert_eq!(*a, -*b);
        }
    }
}
