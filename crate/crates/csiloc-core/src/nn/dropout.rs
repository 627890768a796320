//! Inverted dropout.
//!
//! Kept units are scaled by `1/(1-rate)` during training so inference needs
//! no rescaling and simply skips the mask.

use alloc::format;
use alloc::vec::Vec;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// A sampled keep/drop pattern; values are `0` or `1/(1-rate)`.
#[derive(Debug, Clone)]
pub struct DropoutMask {
    scale: Vec<f64>,
}

impl DropoutMask {
    /// Sample a mask of `len` values with drop probability `rate`.
    pub fn sample(len: usize, rate: f64, rng: &mut ChaCha8Rng) -> Result<Self> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::Config(format!(
                "dropout rate must lie in [0, 1), got {rate}"
            )));
        }
        let keep = 1.0 / (1.0 - rate);
        let scale = (0..len)
            .map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep })
            .collect();
        Ok(DropoutMask { scale })
    }

    pub fn len(&self) -> usize {
        self.scale.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scale.is_empty()
    }

    /// Multiply a buffer by the mask; used identically for activations in
    /// the forward pass and gradients in the backward pass.
    pub fn apply(&self, x: &mut [f64]) {
        assert_eq!(x.len(), self.scale.len(), "dropout mask length mismatch");
        for (v, &s) in x.iter_mut().zip(&self.scale) {
            *v *= s;
        }
    }

    /// Fraction of dropped units, for tests and diagnostics.
    pub fn dropped_fraction(&self) -> f64 {
        if self.scale.is_empty() {
            return 0.0;
        }
        self.scale.iter().filter(|s| **s == 0.0).count() as f64 / self.scale.len() as f64
    }
}

/// Pure op form: in training mode, sample a fresh mask and return the
/// masked copy; in inference mode, return the input unchanged.
pub fn dropout_apply(
    input: &Tensor,
    rate: f64,
    rng: &mut ChaCha8Rng,
    training: bool,
) -> Result<Tensor> {
    if !training {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::Config(format!(
                "dropout rate must lie in [0, 1), got {rate}"
            )));
        }
        return Ok(input.clone());
    }
    let mask = DropoutMask::sample(input.len(), rate, rng)?;
    let mut out = input.clone();
    mask.apply(out.data_mut());
    Ok(out)
}
