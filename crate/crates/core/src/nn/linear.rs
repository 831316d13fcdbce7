use rand::Rng;

use super::{init_uniform, Matrix};
use crate::error::{Error, Result};

/// Affine layer `y = x Wᵀ + b` with `W` of shape out×in.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub weight: Matrix,
    /// 1×out
    pub bias: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearGrads {
    pub weight: Matrix,
    pub bias: Matrix,
}

impl LinearGrads {
    pub fn zeros_like(l: &Linear) -> Self {
        Self {
            weight: Matrix::zeros(l.weight.rows(), l.weight.cols()),
            bias: Matrix::zeros(1, l.bias.cols()),
        }
    }

    pub fn tensors(&self) -> Vec<&Matrix> {
        vec![&self.weight, &self.bias]
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        vec![&mut self.weight, &mut self.bias]
    }

    pub fn accumulate(&mut self, other: &LinearGrads) -> Result<()> {
        self.weight.add_assign(&other.weight)?;
        self.bias.add_assign(&other.bias)
    }
}

impl Linear {
    pub fn new(in_dim: usize, out_dim: usize, rng: &mut impl Rng) -> Self {
        Self {
            weight: init_uniform(out_dim, in_dim, in_dim, rng),
            bias: init_uniform(1, out_dim, in_dim, rng),
        }
    }

    pub fn from_parts(weight: Matrix, bias: Matrix) -> Result<Self> {
        if bias.rows() != 1 || bias.cols() != weight.rows() {
            return Err(Error::Shape(format!(
                "bias {:?} for weight {:?}",
                bias.shape(),
                weight.shape()
            )));
        }
        Ok(Self { weight, bias })
    }

    pub fn in_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn tensors(&self) -> Vec<&Matrix> {
        vec![&self.weight, &self.bias]
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        vec![&mut self.weight, &mut self.bias]
    }

    /// `x`: T×in → T×out
    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.in_dim() {
            return Err(Error::Shape(format!(
                "linear expects width {}, got {}",
                self.in_dim(),
                x.cols()
            )));
        }
        let mut y = x.matmul_t(&self.weight)?;
        y.add_row_broadcast(self.bias.data())?;
        Ok(y)
    }

    /// Gradients for the forward input `x` given `dL/dy`; returns parameter
    /// gradients and `dL/dx`.
    pub fn backward(&self, x: &Matrix, grad_out: &Matrix) -> Result<(LinearGrads, Matrix)> {
        if grad_out.rows() != x.rows() || grad_out.cols() != self.out_dim() {
            return Err(Error::Shape(format!(
                "linear backward: grad {:?} for input {:?}",
                grad_out.shape(),
                x.shape()
            )));
        }
        let mut grads = LinearGrads::zeros_like(self);
        grad_out.add_t_matmul_into(x, &mut grads.weight)?;
        grads.bias = grad_out.sum_rows();
        let grad_x = grad_out.matmul(&self.weight)?;
        Ok((grads, grad_x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    #[test]
    fn identity_passthrough() {
        let l = Linear::from_parts(Matrix::identity(4), Matrix::zeros(1, 4)).unwrap();
        let x = Matrix::from_rows(&[vec![1.0, -2.0, 3.0, 0.5]]).unwrap();
        assert_eq!(l.forward(&x).unwrap(), x);
    }

    #[test]
    fn width_mismatch() {
        let l = Linear::new(3, 2, &mut seed::rng(0));
        assert!(l.forward(&Matrix::zeros(2, 4)).is_err());
        assert!(l.backward(&Matrix::zeros(2, 3), &Matrix::zeros(2, 3)).is_err());
    }
}
