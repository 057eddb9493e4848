//! The adaptation network.
//!
//! ```text
//! x ─ G_f (Linear+ReLU)ⁿ ─ y_bb ─┬─ B_1 ─┐
//!                                ├─ ... ├─ mean = f ─ G_c ─ softmax = p
//!                                └─ B_k ─┘
//! f ⊗ p ─ GRL ─ G_d (Linear+ReLU+Linear) ─ domain logit
//! ```
//!
//! All passes are explicit: `forward` returns a cache and `backward`
//! accumulates gradients into the layers given upstream gradients for the
//! features and the logits.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::diffcore::ops::{relu_backward, relu_forward, sigmoid, softmax};
use crate::diffcore::{LinearLayer, Matrix};
use crate::math::exp;
use crate::rng::{derive_seed2, seeded};
use crate::{Error, Result};

/// Layer widths of a [`GsdeModel`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    pub input: usize,
    pub hidden: usize,
    pub bottleneck: usize,
    pub classes: usize,
    pub disc_hidden: usize,
    /// Number of Linear+ReLU layers in the extractor.
    pub extractor_depth: usize,
}

impl Dims {
    /// Desk-scale widths: two hidden layers of 64, bottleneck 16, discriminator hidden 64.
    pub fn desk(input: usize, classes: usize) -> Self {
        Self { input, hidden: 64, bottleneck: 16, classes, disc_hidden: 64, extractor_depth: 2 }
    }

    fn validate(&self) -> Result<()> {
        let all = [self.input, self.hidden, self.bottleneck, self.classes, self.disc_hidden, self.extractor_depth];
        if all.contains(&0) {
            return Err(crate::error::param_err(format!("zero dimension in {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GsdeModel {
    dims: Dims,
    pub extractor: Vec<LinearLayer>,
    pub bottlenecks: Vec<LinearLayer>,
    pub classifier: LinearLayer,
    /// `[hidden, output]`
    pub discriminator: Vec<LinearLayer>,
    init_seed: u64,
}

/// Builds a freshly initialized model. Every layer draws from its own
/// sub-seed of `seed`, so the `k` bottlenecks start out different.
pub fn init_model(dims: Dims, k: usize, seed: u64) -> Result<GsdeModel> {
    dims.validate()?;
    if k == 0 {
        return Err(crate::error::param_err("at least one bottleneck is required"));
    }
    let layer = |group: u64, idx: usize, i: usize, o: usize| {
        LinearLayer::new(i, o, &mut seeded(derive_seed2(seed, group, idx as u64)))
    };
    let mut extractor = Vec::with_capacity(dims.extractor_depth);
    for i in 0..dims.extractor_depth {
        let in_dim = if i == 0 { dims.input } else { dims.hidden };
        extractor.push(layer(1, i, in_dim, dims.hidden)?);
    }
    let bottlenecks = (0..k)
        .map(|j| layer(2, j, dims.hidden, dims.bottleneck))
        .collect::<Result<Vec<_>>>()?;
    let classifier = layer(3, 0, dims.bottleneck, dims.classes)?;
    let discriminator = alloc::vec![
        layer(4, 0, dims.bottleneck * dims.classes, dims.disc_hidden)?,
        layer(4, 1, dims.disc_hidden, 1)?,
    ];
    Ok(GsdeModel { dims, extractor, bottlenecks, classifier, discriminator, init_seed: seed })
}

/// Intermediate values of the classification path.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    input: Matrix,
    pre: Vec<Matrix>,
    post: Vec<Matrix>,
    pub features: Matrix,
    pub logits: Matrix,
    pub probs: Matrix,
}

/// Intermediate values of the discriminator.
#[derive(Debug, Clone)]
pub struct DiscCache {
    input: Matrix,
    pre: Matrix,
    hidden: Matrix,
    pub logits: Matrix,
}

impl GsdeModel {
    /// Reassembles a model from its layers, checking every shape against `dims`.
    pub fn from_parts(
        dims: Dims,
        extractor: Vec<LinearLayer>,
        bottlenecks: Vec<LinearLayer>,
        classifier: LinearLayer,
        discriminator: Vec<LinearLayer>,
        init_seed: u64,
    ) -> Result<Self> {
        dims.validate()?;
        let check = |l: &LinearLayer, i: usize, o: usize, what: &'static str| {
            if l.in_dim() == i && l.out_dim() == o {
                Ok(())
            } else {
                Err(Error::Shape { op: what, expected: (o, i), got: (l.out_dim(), l.in_dim()) })
            }
        };
        if extractor.len() != dims.extractor_depth || bottlenecks.is_empty() || discriminator.len() != 2 {
            return Err(crate::error::param_err("layer counts do not match the model layout"));
        }
        for (i, l) in extractor.iter().enumerate() {
            check(l, if i == 0 { dims.input } else { dims.hidden }, dims.hidden, "extractor")?;
        }
        for l in &bottlenecks {
            check(l, dims.hidden, dims.bottleneck, "bottleneck")?;
        }
        check(&classifier, dims.bottleneck, dims.classes, "classifier")?;
        check(&discriminator[0], dims.bottleneck * dims.classes, dims.disc_hidden, "discriminator")?;
        check(&discriminator[1], dims.disc_hidden, 1, "discriminator")?;
        Ok(Self { dims, extractor, bottlenecks, classifier, discriminator, init_seed })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn num_bottlenecks(&self) -> usize {
        self.bottlenecks.len()
    }

    pub fn init_seed(&self) -> u64 {
        self.init_seed
    }

    /// Backbone output `y_bb`.
    fn backbone(&self, x: &Matrix) -> Result<(Vec<Matrix>, Vec<Matrix>)> {
        if x.cols() != self.dims.input {
            return Err(Error::Shape { op: "features", expected: (x.rows(), self.dims.input), got: x.shape() });
        }
        let mut pre = Vec::with_capacity(self.extractor.len());
        let mut post: Vec<Matrix> = Vec::with_capacity(self.extractor.len());
        for layer in &self.extractor {
            let z = layer.forward(post.last().unwrap_or(x))?;
            post.push(relu_forward(&z));
            pre.push(z);
        }
        Ok((pre, post))
    }

    fn bottleneck_mean(&self, y_bb: &Matrix) -> Result<Matrix> {
        let mut f = Matrix::zeros(y_bb.rows(), self.dims.bottleneck);
        for b in &self.bottlenecks {
            f.add_assign(&b.forward(y_bb)?)?;
        }
        f.scale(1.0 / self.bottlenecks.len() as f64);
        Ok(f)
    }

    /// Bottleneck features: the mean over the `k` bottlenecks of `B_j(G_f(x))`.
    pub fn features(&self, x: &Matrix) -> Result<Matrix> {
        let (_, post) = self.backbone(x)?;
        self.bottleneck_mean(post.last().expect("extractor_depth >= 1"))
    }

    /// Softmax of the classifier applied to bottleneck features.
    pub fn class_probs(&self, f: &Matrix) -> Result<Matrix> {
        if f.cols() != self.dims.bottleneck {
            return Err(Error::Shape { op: "class_probs", expected: (f.rows(), self.dims.bottleneck), got: f.shape() });
        }
        Ok(softmax(&self.classifier.forward(f)?))
    }

    pub fn forward(&self, x: &Matrix) -> Result<ForwardCache> {
        let (pre, post) = self.backbone(x)?;
        let features = self.bottleneck_mean(post.last().expect("extractor_depth >= 1"))?;
        let logits = self.classifier.forward(&features)?;
        let probs = softmax(&logits);
        Ok(ForwardCache { input: x.clone(), pre, post, features, logits, probs })
    }

    /// Accumulates gradients of the classification path.
    ///
    /// `d_features` is the gradient reaching the bottleneck output from losses
    /// other than the classifier (adversarial through the reversal layer,
    /// semantic); `d_logits` is the gradient at the classifier output.
    pub fn backward(&mut self, cache: &ForwardCache, d_features: &Matrix, d_logits: &Matrix) -> Result<()> {
        let mut d_f = self.classifier.backward(&cache.features, d_logits)?;
        d_f.add_assign(d_features)?;
        d_f.scale(1.0 / self.bottlenecks.len() as f64);
        let y_bb = cache.post.last().expect("extractor_depth >= 1");
        let mut d = Matrix::zeros(y_bb.rows(), y_bb.cols());
        for b in &mut self.bottlenecks {
            d.add_assign(&b.backward(y_bb, &d_f)?)?;
        }
        for i in (0..self.extractor.len()).rev() {
            let d_pre = relu_backward(&cache.pre[i], &d)?;
            let input = if i == 0 { &cache.input } else { &cache.post[i - 1] };
            d = self.extractor[i].backward(input, &d_pre)?;
        }
        Ok(())
    }

    pub fn discriminate(&self, fused: &Matrix) -> Result<DiscCache> {
        let width = self.dims.bottleneck * self.dims.classes;
        if fused.cols() != width {
            return Err(Error::Shape { op: "domain_logits", expected: (fused.rows(), width), got: fused.shape() });
        }
        let pre = self.discriminator[0].forward(fused)?;
        let hidden = relu_forward(&pre);
        let logits = self.discriminator[1].forward(&hidden)?;
        Ok(DiscCache { input: fused.clone(), pre, hidden, logits })
    }

    /// Discriminator logits for fused features (the reversal layer is the identity going forward).
    pub fn domain_logits(&self, fused: &Matrix) -> Result<Matrix> {
        Ok(self.discriminate(fused)?.logits)
    }

    /// Accumulates discriminator gradients and returns the (not yet reversed)
    /// gradient with respect to the fused input.
    pub fn discriminator_backward(&mut self, cache: &DiscCache, d_logits: &Matrix) -> Result<Matrix> {
        let d_hidden = self.discriminator[1].backward(&cache.hidden, d_logits)?;
        let d_pre = relu_backward(&cache.pre, &d_hidden)?;
        self.discriminator[0].backward(&cache.input, &d_pre)
    }

    /// Discriminator output `sigmoid(G_d(f ⊗ p))` for raw inputs, one value per row.
    pub fn domain_outputs(&self, x: &Matrix) -> Result<Vec<f64>> {
        let f = self.features(x)?;
        let p = self.class_probs(&f)?;
        let logits = self.domain_logits(&multilinear(&f, &p)?)?;
        Ok(logits.as_slice().iter().map(|&z| sigmoid(z)).collect())
    }

    /// Class probabilities for raw inputs.
    pub fn predict_probs(&self, x: &Matrix) -> Result<Matrix> {
        self.class_probs(&self.features(x)?)
    }

    /// Named layers in a fixed order: extractor, bottlenecks, classifier, discriminator.
    pub fn named_layers(&self) -> Vec<(String, &LinearLayer)> {
        let mut out = Vec::new();
        out.extend(self.extractor.iter().enumerate().map(|(i, l)| (format!("extractor.{i}"), l)));
        out.extend(self.bottlenecks.iter().enumerate().map(|(i, l)| (format!("bottleneck.{i}"), l)));
        out.push((String::from("classifier"), &self.classifier));
        out.extend(self.discriminator.iter().enumerate().map(|(i, l)| (format!("discriminator.{i}"), l)));
        out
    }

    /// Same order as [`GsdeModel::named_layers`].
    pub fn layers_mut(&mut self) -> impl Iterator<Item = &mut LinearLayer> {
        self.extractor
            .iter_mut()
            .chain(self.bottlenecks.iter_mut())
            .chain(core::iter::once(&mut self.classifier))
            .chain(self.discriminator.iter_mut())
    }

    pub fn zero_grad(&mut self) {
        self.layers_mut().for_each(LinearLayer::zero_grad);
    }

    pub fn parameter_count(&self) -> usize {
        self.named_layers().iter().map(|(_, l)| l.parameter_count()).sum()
    }

    /// FNV-1a over the bit patterns of every parameter.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for (_, l) in self.named_layers() {
            for v in l.weight.as_slice().iter().chain(l.bias.as_slice()) {
                for byte in v.to_bits().to_le_bytes() {
                    h ^= u64::from(byte);
                    h = h.wrapping_mul(0x0100_0000_01b3);
                }
            }
        }
        h
    }

    /// Overwrites every bottleneck with a copy of the first one.
    pub fn clone_first_bottleneck(&mut self) {
        let first = self.bottlenecks[0].clone();
        for b in self.bottlenecks.iter_mut().skip(1) {
            *b = first.clone();
        }
    }
}

/// Row-wise flattened outer product `f_i ⊗ p_i`: entry `c·b + j` is `p_c·f_j`,
/// so class `c` owns the contiguous block `c·b .. (c+1)·b`.
pub fn multilinear(f: &Matrix, p: &Matrix) -> Result<Matrix> {
    if f.rows() != p.rows() {
        return Err(Error::Shape { op: "multilinear", expected: (f.rows(), p.cols()), got: p.shape() });
    }
    let (b, k) = (f.cols(), p.cols());
    let mut out = Matrix::zeros(f.rows(), b * k);
    for i in 0..f.rows() {
        let fi = f.row(i);
        let pi = p.row(i);
        let row = out.row_mut(i);
        for (c, &pc) in pi.iter().enumerate() {
            for (o, &fj) in row[c * b..(c + 1) * b].iter_mut().zip(fi) {
                *o = pc * fj;
            }
        }
    }
    Ok(out)
}

/// Gradients of [`multilinear`] with respect to `f` and `p`.
pub fn multilinear_backward(f: &Matrix, p: &Matrix, upstream: &Matrix) -> Result<(Matrix, Matrix)> {
    let (b, k) = (f.cols(), p.cols());
    upstream.ensure_shape("multilinear_backward", f.rows(), b * k)?;
    let mut d_f = Matrix::zeros(f.rows(), b);
    let mut d_p = Matrix::zeros(p.rows(), k);
    for i in 0..f.rows() {
        let up = upstream.row(i);
        let fi = f.row(i);
        let pi = p.row(i);
        for c in 0..k {
            let block = &up[c * b..(c + 1) * b];
            d_p[(i, c)] = block.iter().zip(fi).map(|(u, x)| u * x).sum();
            for (j, &u) in block.iter().enumerate() {
                d_f[(i, j)] += u * pi[c];
            }
        }
    }
    Ok((d_f, d_p))
}

/// Backward pass of the gradient reversal layer: `-l_am · upstream`.
pub fn grl_backward(upstream: &Matrix, l_am: f64) -> Matrix {
    upstream.scaled(-l_am)
}

/// Progressive coefficient for the adaptation losses and the reversal layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrlSchedule {
    pub gamma: f64,
}

impl Default for GrlSchedule {
    fn default() -> Self {
        Self { gamma: 10.0 }
    }
}

impl GrlSchedule {
    /// `2 / (1 + exp(-gamma·progress)) - 1`, with `progress` clamped to `[0, 1]`.
    pub fn lam(&self, progress: f64) -> f64 {
        let p = progress.clamp(0.0, 1.0);
        2.0 / (1.0 + exp(-self.gamma * p)) - 1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffcore::ops::row_sums;
    use rand::Rng;

    fn small_dims() -> Dims {
        Dims { input: 3, hidden: 5, bottleneck: 4, classes: 3, disc_hidden: 6, extractor_depth: 2 }
    }

    fn random_input(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut rng = seeded(seed);
        let data = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
        Matrix::from_vec(rows, cols, data).unwrap()
    }

    #[test]
    fn init_is_deterministic_per_seed() {
        let a = init_model(small_dims(), 5, 11).unwrap();
        assert_eq!(a, init_model(small_dims(), 5, 11).unwrap());
        assert_ne!(a.fingerprint(), init_model(small_dims(), 5, 12).unwrap().fingerprint());
        assert_eq!(a.num_bottlenecks(), 5);
        assert_ne!(a.bottlenecks[0], a.bottlenecks[1]);
        assert!(init_model(small_dims(), 0, 1).is_err());
        assert!(init_model(Dims { hidden: 0, ..small_dims() }, 1, 1).is_err());
    }

    #[test]
    fn discriminator_input_is_b_times_k() {
        let m = init_model(small_dims(), 2, 1).unwrap();
        assert_eq!(m.discriminator[0].in_dim(), 12);
        assert_eq!(m.classifier.in_dim(), 4);
    }

    #[test]
    fn cloned_bottlenecks_match_single() {
        let mut m = init_model(small_dims(), 4, 3).unwrap();
        m.clone_first_bottleneck();
        let x = random_input(5, 3, 2);
        let multi = m.features(&x).unwrap();
        let mut single = m.clone();
        single.bottlenecks.truncate(1);
        let one = single.features(&x).unwrap();
        for (a, b) in multi.as_slice().iter().zip(one.as_slice()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn features_are_mean_of_bottlenecks() {
        let m = init_model(small_dims(), 3, 4).unwrap();
        let x = random_input(4, 3, 5);
        // recompute by hand, layer by layer
        let mut h = x.clone();
        for l in &m.extractor {
            let z = l.forward(&h).unwrap();
            h = z.map(|v| if v > 0.0 { v } else { 0.0 });
        }
        let f = m.features(&x).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let mut acc = 0.0;
                for b in &m.bottlenecks {
                    let mut v = b.bias[(j, 0)];
                    for (w, hv) in b.weight.row(j).iter().zip(h.row(i)) {
                        v += w * hv;
                    }
                    acc += v;
                }
                assert!((f[(i, j)] - acc / 3.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_classifier_gives_uniform() {
        let mut m = init_model(small_dims(), 1, 1).unwrap();
        m.classifier.weight.fill(0.0);
        m.classifier.bias.fill(0.0);
        let p = m.predict_probs(&random_input(3, 3, 1)).unwrap();
        for &v in p.as_slice() {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn probs_rows_sum_to_one_and_argmax_shift_invariant() {
        let mut m = init_model(small_dims(), 2, 8).unwrap();
        let x = random_input(6, 3, 9);
        let p = m.predict_probs(&x).unwrap();
        for s in row_sums(&p) {
            assert!((s - 1.0).abs() < 1e-12);
        }
        let before = p.argmax_rows();
        for b in m.classifier.bias.as_mut_slice() {
            *b += 7.5;
        }
        assert_eq!(m.predict_probs(&x).unwrap().argmax_rows(), before);
    }

    #[test]
    fn multilinear_one_hot_places_block() {
        let f = Matrix::from_rows(&[[1.0, 2.0]]).unwrap();
        let p = Matrix::from_rows(&[[0.0, 1.0, 0.0]]).unwrap();
        let out = multilinear(&f, &p).unwrap();
        assert_eq!(out.as_slice(), &[0.0, 0.0, 1.0, 2.0, 0.0, 0.0]);
    }

    #[test]
    fn multilinear_block_sum_and_norm() {
        let f = random_input(3, 4, 1);
        let p = softmax(&random_input(3, 3, 2));
        let out = multilinear(&f, &p).unwrap();
        for i in 0..3 {
            let row = out.row(i);
            for j in 0..4 {
                let s: f64 = (0..3).map(|c| row[c * 4 + j]).sum();
                assert!((s - f[(i, j)]).abs() < 1e-12);
            }
            let lhs = crate::diffcore::norm(row);
            let rhs = crate::diffcore::norm(f.row(i)) * crate::diffcore::norm(p.row(i));
            assert!((lhs - rhs).abs() < 1e-9);
        }
        assert!(multilinear(&f, &Matrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn grl_flips_and_scales() {
        let g = random_input(2, 3, 4);
        let r = grl_backward(&g, 1.0);
        for (a, b) in r.as_slice().iter().zip(g.as_slice()) {
            assert_eq!(*a, -*b);
        }
        assert!(grl_backward(&g, 0.0).as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn lam_schedule() {
        let s = GrlSchedule::default();
        assert_eq!(s.lam(0.0), 0.0);
        // 2/(1+e^-10) - 1
        assert!((s.lam(1.0) - 0.999_909_204_262_595_1).abs() < 1e-12);
        let mut prev = -1.0;
        for i in 0..=100 {
            let v = s.lam(i as f64 / 100.0);
            assert!(v >= prev && (0.0..1.0).contains(&v));
            prev = v;
        }
    }

    #[test]
    fn shape_errors() {
        let m = init_model(small_dims(), 1, 1).unwrap();
        assert!(m.features(&Matrix::zeros(2, 2)).is_err());
        assert!(m.class_probs(&Matrix::zeros(2, 3)).is_err());
        assert!(m.domain_logits(&Matrix::zeros(2, 4)).is_err());
    }
}
