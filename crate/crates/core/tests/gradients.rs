//! Analytic gradients against central finite differences.

mod common;

use common::{random_matrix, rel_err, total_gradient_error};
use gsde_core::diffcore::ops::{cross_entropy, relu_backward, relu_forward, softmax, softmax_backward};
use gsde_core::diffcore::{LinearLayer, Matrix};
use gsde_core::rng::seeded;
use rand::Rng;


#[test]
fn linear_layer_matches_finite_differences() {
    for seed in 0..20 {
        let mut rng = seeded(seed);
        let batch = rng.random_range(1..=4);
        let (i, o) = (rng.random_range(1..=8), rng.random_range(1..=8));
        let mut layer = LinearLayer::new(i, o, &mut rng).unwrap();
        let x = random_matrix(batch, i, &mut rng);
        let w = random_matrix(batch, o, &mut rng);
        // L = Σ w ⊙ layer(x)
        let loss = |l: &LinearLayer, x: &Matrix| -> f64 {
            l.forward(x).unwrap().as_slice().iter().zip(w.as_slice()).map(|(a, b)| a * b).sum()
        };
        let dx = layer.backward(&x, &w).unwrap();
        let h = 1e-6;
        for idx in 0..layer.weight.as_slice().len() {
            let mut p = layer.clone();
            p.weight.as_mut_slice()[idx] += h;
            let mut m = layer.clone();
            m.weight.as_mut_slice()[idx] -= h;
            let fd = (loss(&p, &x) - loss(&m, &x)) / (2.0 * h);
            assert!(rel_err(layer.grad_weight.as_slice()[idx], fd, 1e-8) < 1e-5);
        }
        for idx in 0..o {
            let mut p = layer.clone();
            p.bias.as_mut_slice()[idx] += h;
            let mut m = layer.clone();
            m.bias.as_mut_slice()[idx] -= h;
            let fd = (loss(&p, &x) - loss(&m, &x)) / (2.0 * h);
            assert!(rel_err(layer.grad_bias.as_slice()[idx], fd, 1e-8) < 1e-5);
        }
        for idx in 0..x.as_slice().len() {
            let mut xp = x.clone();
            xp.as_mut_slice()[idx] += h;
            let mut xm = x.clone();
            xm.as_mut_slice()[idx] -= h;
            let fd = (loss(&layer, &xp) - loss(&layer, &xm)) / (2.0 * h);
            assert!(rel_err(dx.as_slice()[idx], fd, 1e-8) < 1e-5);
        }
    }
}

#[test]
fn activations_match_finite_differences() {
    for seed in 0..20 {
        let mut rng = seeded(100 + seed);
        let batch = rng.random_range(1..=4);
        let dim = rng.random_range(2..=8);
        let z = random_matrix(batch, dim, &mut rng);
        let up = random_matrix(batch, dim, &mut rng);
        let labels: Vec<usize> = (0..batch).map(|_| rng.random_range(0..dim)).collect();
        let onehot = Matrix::one_hot(&labels, dim);
        let h = 1e-6;
        let weighted = |m: &Matrix| m.as_slice().iter().zip(up.as_slice()).map(|(a, b)| a * b).sum::<f64>();

        let d_relu = relu_backward(&z, &up).unwrap();
        let p = softmax(&z);
        let d_soft = softmax_backward(&p, &up).unwrap();
        let d_ce = softmax_backward(&p, &Matrix::from_vec(batch, dim, p.as_slice().iter().zip(onehot.as_slice()).map(|(pv, t)| -t / pv / batch as f64).collect()).unwrap()).unwrap();
        for idx in 0..z.as_slice().len() {
            let shifted = |delta: f64| {
                let mut zz = z.clone();
                zz.as_mut_slice()[idx] += delta;
                zz
            };
            let (zp, zm) = (shifted(h), shifted(-h));
            if z.as_slice()[idx].abs() > 1e-4 {
                let fd = (weighted(&relu_forward(&zp)) - weighted(&relu_forward(&zm))) / (2.0 * h);
                assert!(rel_err(d_relu.as_slice()[idx], fd, 1e-8) < 1e-5);
            }
            let fd = (weighted(&softmax(&zp)) - weighted(&softmax(&zm))) / (2.0 * h);
            assert!(rel_err(d_soft.as_slice()[idx], fd, 1e-8) < 1e-5);
            let ce = |zz: &Matrix| cross_entropy(&softmax(zz), &onehot).unwrap();
            let fd = (ce(&zp) - ce(&zm)) / (2.0 * h);
            assert!(rel_err(d_ce.as_slice()[idx], fd, 1e-8) < 1e-5);
        }
    }
}

#[test]
fn total_loss_gradient_matches_finite_differences() {
    for seed in 0..10 {
        let err = total_gradient_error(seed, false);
        assert!(err < 1e-4, "seed {seed}: worst relative error {err:e}");
    }
}

#[test]
fn total_loss_gradient_with_extra_pseudo_rows() {
    for seed in 20..23 {
        let err = total_gradient_error(seed, true);
        assert!(err < 1e-4, "seed {seed}: worst relative error {err:e}");
    }
}
