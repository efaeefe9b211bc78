use ndarray::Zip;

use super::Matrix;
use crate::error::{Error, Result};

/// A trainable array with its gradient and Adam moment estimates.
#[derive(Clone, Debug, PartialEq)]
pub struct Parameter {
    pub value: Matrix,
    pub grad: Matrix,
    first_moment: Matrix,
    second_moment: Matrix,
    step: u64,
}

impl Parameter {
    pub fn new(value: Matrix) -> Self {
        let zeros = Matrix::zeros(value.raw_dim());
        Parameter {
            grad: zeros.clone(),
            first_moment: zeros.clone(),
            second_moment: zeros,
            value,
            step: 0,
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.value.nrows(), self.value.ncols())
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self) -> &Matrix {
        &self.first_moment
    }

    pub fn second_moment(&self) -> &Matrix {
        &self.second_moment
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for Adam {
    fn default() -> Self {
        Adam {
            lr: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl Adam {
    /// One bias-corrected Adam update over every parameter.
    ///
    /// If any gradient holds a NaN or infinity, nothing is updated and
    /// the offending parameter index is returned in the error.
    pub fn step(&self, params: &mut [&mut Parameter]) -> Result<()> {
        if !(self.lr > 0.0) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.lr)));
        }
        if let Some(index) = params.iter().position(|p| p.grad.iter().any(|g| !g.is_finite())) {
            return Err(Error::NonFiniteGradient { index });
        }
        for p in params.iter_mut() {
            p.step += 1;
            let t = p.step as i32;
            let bias1 = 1.0 - self.beta1.powi(t);
            let bias2 = 1.0 - self.beta2.powi(t);
            let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.eps);
            Zip::from(&mut p.value)
                .and(&p.grad)
                .and(&mut p.first_moment)
                .and(&mut p.second_moment)
                .for_each(|w, &g, m, v| {
                    *m = b1 * *m + (1.0 - b1) * g;
                    *v = b2 * *v + (1.0 - b2) * g * g;
                    let m_hat = *m / bias1;
                    let v_hat = *v / bias2;
                    *w -= lr * m_hat / (v_hat.sqrt() + eps);
                });
        }
        Ok(())
    }
}
