//! Fully connected layer over row-major batches.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg;
use crate::nn::init;
use crate::tensor::Tensor;

/// `y = x * W + b` with weights stored `[in, out]` so the forward product
/// needs no transposition.
#[derive(Debug, Clone)]
pub struct Dense {
    pub weights: Tensor,
    pub bias: Tensor,
    in_dim: usize,
    out_dim: usize,
}

impl Dense {
    pub fn new(in_dim: usize, out_dim: usize) -> Result<Self> {
        if in_dim == 0 || out_dim == 0 {
            return Err(Error::Config(format!(
                "dense layer needs positive dimensions, got {in_dim}x{out_dim}"
            )));
        }
        Ok(Dense {
            weights: Tensor::zeros(&[in_dim, out_dim]),
            bias: Tensor::zeros(&[out_dim]),
            in_dim,
            out_dim,
        })
    }

    /// Kaiming fill for ReLU-coupled layers.
    pub fn init_kaiming(&mut self, rng: &mut ChaCha8Rng) {
        init::kaiming_uniform(self.weights.data_mut(), self.in_dim, rng);
        self.bias.data_mut().fill(0.0);
    }

    /// `+/-1/sqrt(in)` fill for linear output heads.
    pub fn init_scaled(&mut self, rng: &mut ChaCha8Rng) {
        init::scaled_uniform(self.weights.data_mut(), self.in_dim, rng);
        self.bias.data_mut().fill(0.0);
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    fn check_batch(&self, x: &Tensor, dim: usize, what: &str) -> Result<usize> {
        let dims = x.dims();
        if dims.len() != 2 || dims[1] != dim {
            return Err(Error::Shape(format!(
                "{what}: expected [batch, {dim}], got {dims:?}"
            )));
        }
        Ok(dims[0])
    }

    /// Forward over a `[batch, in]` tensor.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let b = self.check_batch(x, self.in_dim, "dense forward input")?;
        let mut y = Tensor::zeros(&[b, self.out_dim]);
        linalg::gemm_nn(
            b,
            self.in_dim,
            self.out_dim,
            x.data(),
            self.weights.data(),
            y.data_mut(),
            false,
        );
        let bias = self.bias.data();
        for row in y.data_mut().chunks_exact_mut(self.out_dim) {
            for (v, &bv) in row.iter_mut().zip(bias) {
                *v += bv;
            }
        }
        Ok(y)
    }

    /// Backward pass. `x` is the forward input; gradients accumulate into
    /// the weight and bias tensors. Returns the input gradient when
    /// `need_dx` is set.
    pub fn backward(&mut self, x: &Tensor, dy: &Tensor, need_dx: bool) -> Result<Option<Tensor>> {
        let b = self.check_batch(x, self.in_dim, "dense backward input")?;
        let bd = self.check_batch(dy, self.out_dim, "dense backward upstream")?;
        if b != bd {
            return Err(Error::Shape(format!(
                "dense backward: input batch {b} vs upstream batch {bd}"
            )));
        }
        linalg::gemm_tn(
            self.in_dim,
            b,
            self.out_dim,
            x.data(),
            dy.data(),
            self.weights.grad_mut(),
            true,
        );
        let bias_grad = self.bias.grad_mut();
        for row in dy.data().chunks_exact(self.out_dim) {
            for (g, &d) in bias_grad.iter_mut().zip(row) {
                *g += d;
            }
        }
        if !need_dx {
            return Ok(None);
        }
        // dX = dY * W^T, computed as dX^T = W * dY^T so the big weight matrix
        // streams through the packed kernel in its stored layout.
        let mut dy_t = vec![0.0; dy.len()];
        linalg::transpose(dy.data(), b, self.out_dim, &mut dy_t);
        let mut dx_t = vec![0.0; b * self.in_dim];
        linalg::gemm_nn(
            self.in_dim,
            self.out_dim,
            b,
            self.weights.data(),
            &dy_t,
            &mut dx_t,
            false,
        );
        let mut dx = Tensor::zeros(&[b, self.in_dim]);
        linalg::transpose(&dx_t, self.in_dim, b, dx.data_mut());
        Ok(Some(dx))
    }
}

/// Single-vector forward: `weights` stored `[in, out]`.
pub fn dense_apply(input: &[f64], weights: &Tensor, bias: &[f64]) -> Result<Vec<f64>> {
    let dims = weights.dims();
    if dims.len() != 2 {
        return Err(Error::Shape(format!("weights must be 2-d, got {dims:?}")));
    }
    let (ind, outd) = (dims[0], dims[1]);
    if input.len() != ind || bias.len() != outd {
        return Err(Error::Shape(format!(
            "dense apply: input {} / bias {} against weights {ind}x{outd}",
            input.len(),
            bias.len()
        )));
    }
    let mut out = bias.to_vec();
    linalg::gemm_nn(1, ind, outd, input, weights.data(), &mut out, true);
    Ok(out)
}
