//! Adam optimizer.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

/// Adam state for one parameter block. Defaults: beta1 0.9, beta2 0.999, eps 1e-8,
/// with standard bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    // running beta^t factors, updated multiplicatively each step
    beta1_t: f64,
    beta2_t: f64,
    steps: u64,
}

impl Adam {
    pub fn new(len: usize, lr: f64) -> Result<Self> {
        Self::with_hyper(len, lr, 0.9, 0.999, 1e-8)
    }

    pub fn with_hyper(len: usize, lr: f64, beta1: f64, beta2: f64, eps: f64) -> Result<Self> {
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(Error::Config(format!("learning rate must be positive, got {lr}")));
        }
        if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) || eps <= 0.0 {
            return Err(Error::Config(format!(
                "invalid adam hyperparameters: beta1 {beta1}, beta2 {beta2}, eps {eps}"
            )));
        }
        Ok(Adam {
            lr,
            beta1,
            beta2,
            eps,
            m: vec![0.0; len],
            v: vec![0.0; len],
            beta1_t: 1.0,
            beta2_t: 1.0,
            steps: 0,
        })
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// One update of `params` against `grads`.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::Shape(format!(
                "adam: state {} vs params {} vs grads {}",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        self.steps += 1;
        self.beta1_t *= self.beta1;
        self.beta2_t *= self.beta2;
        // fold both bias corrections into one step size
        let rate = self.lr * math::sqrt(1.0 - self.beta2_t) / (1.0 - self.beta1_t);
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        for i in 0..params.len() {
            let g = grads[i];
            let m = b1 * self.m[i] + (1.0 - b1) * g;
            let v = b2 * self.v[i] + (1.0 - b2) * g * g;
            self.m[i] = m;
            self.v[i] = v;
            params[i] -= rate * m / (math::sqrt(v) + eps);
        }
        Ok(())
    }
}
