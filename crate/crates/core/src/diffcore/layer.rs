use rand::Rng;

use super::Matrix;
use crate::{Error, Result};

/// Affine layer `y = x·Wᵀ + b` with accumulated gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearLayer {
    /// `out x in`
    pub weight: Matrix,
    /// `out x 1`
    pub bias: Matrix,
    pub grad_weight: Matrix,
    pub grad_bias: Matrix,
}

impl LinearLayer {
    /// Uniform fan-in initialization, `U(-1/√in, 1/√in)` for weights and bias.
    pub fn new<R: Rng + ?Sized>(in_dim: usize, out_dim: usize, rng: &mut R) -> Result<Self> {
        if in_dim == 0 || out_dim == 0 {
            return Err(crate::error::param_err("linear layer dimensions must be positive"));
        }
        let bound = 1.0 / crate::math::sqrt(in_dim as f64);
        let mut weight = Matrix::zeros(out_dim, in_dim);
        for w in weight.as_mut_slice() {
            *w = rng.random_range(-bound..bound);
        }
        let mut bias = Matrix::zeros(out_dim, 1);
        for b in bias.as_mut_slice() {
            *b = rng.random_range(-bound..bound);
        }
        Ok(Self::from_parts(weight, bias))
    }

    /// Wraps explicit parameters. Panics if `bias` is not `out x 1`.
    pub fn from_parts(weight: Matrix, bias: Matrix) -> Self {
        assert_eq!(bias.shape(), (weight.rows(), 1), "bias must be out x 1");
        let grad_weight = Matrix::zeros(weight.rows(), weight.cols());
        let grad_bias = Matrix::zeros(bias.rows(), 1);
        Self { weight, bias, grad_weight, grad_bias }
    }

    pub fn in_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.in_dim() {
            return Err(Error::Shape {
                op: "linear_forward",
                expected: (x.rows(), self.in_dim()),
                got: x.shape(),
            });
        }
        let mut out = x.matmul_nt(&self.weight)?;
        let bias = self.bias.as_slice();
        for i in 0..out.rows() {
            out.row_mut(i).iter_mut().zip(bias).for_each(|(o, b)| *o += b);
        }
        Ok(out)
    }

    /// Accumulates parameter gradients for `upstream = dL/dy` and returns `dL/dx`.
    pub fn backward(&mut self, x: &Matrix, upstream: &Matrix) -> Result<Matrix> {
        x.ensure_shape("linear_backward", upstream.rows(), self.in_dim())?;
        upstream.ensure_shape("linear_backward", x.rows(), self.out_dim())?;
        self.grad_weight.add_assign(&upstream.matmul_tn(x)?)?;
        let col_sums = upstream.column_sums();
        self.grad_bias.as_mut_slice().iter_mut().zip(&col_sums).for_each(|(g, s)| *g += s);
        upstream.matmul(&self.weight)
    }

    pub fn zero_grad(&mut self) {
        self.grad_weight.fill(0.0);
        self.grad_bias.fill(0.0);
    }

    pub fn parameter_count(&self) -> usize {
        self.weight.as_slice().len() + self.bias.as_slice().len()
    }
}
