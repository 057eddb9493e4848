use super::LinearLayer;

/// One plain SGD step over `layers`: `p ← p - lr·(grad + weight_decay·p)`.
///
/// Gradients are left in place; callers zero them before the next backward pass.
pub fn sgd_step<'a, I>(layers: I, learning_rate: f64, weight_decay: f64)
where
    I: IntoIterator<Item = &'a mut LinearLayer>,
{
    debug_assert!(learning_rate > 0.0, "learning rate must be positive");
    for layer in layers {
        update(layer.weight.as_mut_slice(), layer.grad_weight.as_slice(), learning_rate, weight_decay);
        update(layer.bias.as_mut_slice(), layer.grad_bias.as_slice(), learning_rate, weight_decay);
    }
}

fn update(params: &mut [f64], grads: &[f64], lr: f64, wd: f64) {
    for (p, g) in params.iter_mut().zip(grads) {
        *p -= lr * (g + wd * *p);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffcore::Matrix;

    fn scalar(w: f64) -> LinearLayer {
        LinearLayer::from_parts(Matrix::from_rows(&[[w]]).unwrap(), Matrix::zeros(1, 1))
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut layer = scalar(1.5);
        sgd_step([&mut layer], 0.1, 0.0);
        assert_eq!(layer.weight.as_slice(), &[1.5]);
    }

    #[test]
    fn single_step_arithmetic() {
        let mut layer = scalar(1.0);
        layer.grad_weight[(0, 0)] = 1.0;
        sgd_step([&mut layer], 0.1, 0.0);
        assert!((layer.weight[(0, 0)] - 0.9).abs() < 1e-15);
        assert_eq!(layer.grad_weight[(0, 0)], 1.0);
    }

    #[test]
    fn quadratic_converges_to_its_minimum() {
        // L(w) = (w - 3)^2, minimum at w = 3
        let mut layer = scalar(-4.0);
        let mut steps = 0;
        while (layer.weight[(0, 0)] - 3.0).abs() > 1e-6 {
            layer.zero_grad();
            layer.grad_weight[(0, 0)] = 2.0 * (layer.weight[(0, 0)] - 3.0);
            sgd_step([&mut layer], 0.05, 0.0);
            steps += 1;
            assert!(steps <= 1000, "did not converge");
        }
    }

    #[test]
    fn weight_decay_shrinks() {
        let mut layer = scalar(2.0);
        sgd_step([&mut layer], 0.5, 0.1);
        assert!((layer.weight[(0, 0)] - 1.9).abs() < 1e-15);
    }
}
