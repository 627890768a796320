//! LSTM cell with batched forward and backward passes.
//!
//! Gate pre-activations are packed `[input, forget, cell, output]` along the
//! last axis. The forget-gate bias starts at +1 so early training does not
//! flush cell state.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg;
use crate::math;
use crate::nn::init;
use crate::tensor::Tensor;

/// Cell parameters: input weights `[in, 4h]`, recurrent weights `[h, 4h]`,
/// bias `[4h]`.
#[derive(Debug, Clone)]
pub struct LstmParams {
    pub wx: Tensor,
    pub wh: Tensor,
    pub bias: Tensor,
    in_dim: usize,
    hidden: usize,
}

/// Post-nonlinearity gate values and cell tanh kept from a forward step.
#[derive(Debug, Default, Clone)]
pub struct StepCache {
    gates: Vec<f64>,
    tanh_c: Vec<f64>,
    batch: usize,
}

impl LstmParams {
    pub fn new(in_dim: usize, hidden: usize) -> Result<Self> {
        if in_dim == 0 || hidden == 0 {
            return Err(Error::Config(format!(
                "lstm needs positive dimensions, got in {in_dim}, hidden {hidden}"
            )));
        }
        Ok(LstmParams {
            wx: Tensor::zeros(&[in_dim, 4 * hidden]),
            wh: Tensor::zeros(&[hidden, 4 * hidden]),
            bias: Tensor::zeros(&[4 * hidden]),
            in_dim,
            hidden,
        })
    }

    /// `+/-1/sqrt(fan_in)` weights, zero bias except the forget block at +1.
    pub fn init(&mut self, rng: &mut ChaCha8Rng) {
        init::scaled_uniform(self.wx.data_mut(), self.in_dim, rng);
        init::scaled_uniform(self.wh.data_mut(), self.hidden, rng);
        let h = self.hidden;
        let bias = self.bias.data_mut();
        bias.fill(0.0);
        bias[h..2 * h].fill(1.0);
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    fn check(&self, t: &Tensor, dim: usize, what: &str) -> Result<usize> {
        let d = t.dims();
        if d.len() != 2 || d[1] != dim {
            return Err(Error::Shape(format!(
                "{what}: expected [batch, {dim}], got {d:?}"
            )));
        }
        Ok(d[0])
    }

    /// One step over a batch. Returns `(h, c)`; fills `cache` for a later
    /// backward pass when given.
    pub fn forward(
        &self,
        x: &Tensor,
        h_prev: &Tensor,
        c_prev: &Tensor,
        mut cache: Option<&mut StepCache>,
    ) -> Result<(Tensor, Tensor)> {
        let b = self.check(x, self.in_dim, "lstm input")?;
        let bh = self.check(h_prev, self.hidden, "lstm hidden state")?;
        let bc = self.check(c_prev, self.hidden, "lstm cell state")?;
        if b != bh || b != bc {
            return Err(Error::Shape(format!(
                "lstm batch mismatch: x {b}, h {bh}, c {bc}"
            )));
        }
        let h = self.hidden;
        let g4 = 4 * h;
        let mut pre = vec![0.0; b * g4];
        linalg::gemm_nn(b, self.in_dim, g4, x.data(), self.wx.data(), &mut pre, false);
        linalg::gemm_nn(b, h, g4, h_prev.data(), self.wh.data(), &mut pre, true);
        let bias = self.bias.data();
        for row in pre.chunks_exact_mut(g4) {
            for (v, &bv) in row.iter_mut().zip(bias) {
                *v += bv;
            }
        }
        // gate nonlinearities in place: sigmoid on i, f, o; tanh on g
        for row in pre.chunks_exact_mut(g4) {
            for v in row[..2 * h].iter_mut() {
                *v = math::sigmoid(*v);
            }
            for v in row[2 * h..3 * h].iter_mut() {
                *v = math::tanh(*v);
            }
            for v in row[3 * h..].iter_mut() {
                *v = math::sigmoid(*v);
            }
        }
        let mut c_new = Tensor::zeros(&[b, h]);
        let mut h_new = Tensor::zeros(&[b, h]);
        let mut tanh_c = vec![0.0; b * h];
        {
            let cp = c_prev.data();
            let cn = c_new.data_mut();
            let hn = h_new.data_mut();
            for bi in 0..b {
                let row = &pre[bi * g4..][..g4];
                let (gi, gf, gg, go) = (&row[..h], &row[h..2 * h], &row[2 * h..3 * h], &row[3 * h..]);
                for u in 0..h {
                    let c = gf[u] * cp[bi * h + u] + gi[u] * gg[u];
                    let tc = math::tanh(c);
                    cn[bi * h + u] = c;
                    tanh_c[bi * h + u] = tc;
                    hn[bi * h + u] = go[u] * tc;
                }
            }
        }
        if let Some(cache) = cache.as_deref_mut() {
            cache.gates = pre;
            cache.tanh_c = tanh_c;
            cache.batch = b;
        }
        Ok((h_new, c_new))
    }

    /// Backward through one step. `dh`/`dc` are the gradients flowing into
    /// this step's outputs. Parameter gradients accumulate; returns
    /// `(dx, dh_prev, dc_prev)`.
    #[allow(clippy::too_many_arguments)]
    pub fn backward(
        &mut self,
        x: &Tensor,
        h_prev: &Tensor,
        c_prev: &Tensor,
        cache: &StepCache,
        dh: &Tensor,
        dc: &Tensor,
    ) -> Result<(Tensor, Tensor, Tensor)> {
        let b = self.check(x, self.in_dim, "lstm input")?;
        if cache.batch != b {
            return Err(Error::Usage("lstm backward against a stale cache".into()));
        }
        let h = self.hidden;
        let g4 = 4 * h;
        let mut dpre = vec![0.0; b * g4];
        let mut dc_prev = Tensor::zeros(&[b, h]);
        {
            let cp = c_prev.data();
            let dcp = dc_prev.data_mut();
            let (dhd, dcd) = (dh.data(), dc.data());
            for bi in 0..b {
                let row = &cache.gates[bi * g4..][..g4];
                let (gi, gf, gg, go) = (&row[..h], &row[h..2 * h], &row[2 * h..3 * h], &row[3 * h..]);
                let drow = &mut dpre[bi * g4..][..g4];
                for u in 0..h {
                    let tc = cache.tanh_c[bi * h + u];
                    let dho = dhd[bi * h + u];
                    let d_o = dho * tc;
                    let dct = dcd[bi * h + u] + dho * go[u] * (1.0 - tc * tc);
                    let d_i = dct * gg[u];
                    let d_f = dct * cp[bi * h + u];
                    let d_g = dct * gi[u];
                    dcp[bi * h + u] = dct * gf[u];
                    drow[u] = d_i * gi[u] * (1.0 - gi[u]);
                    drow[h + u] = d_f * gf[u] * (1.0 - gf[u]);
                    drow[2 * h + u] = d_g * (1.0 - gg[u] * gg[u]);
                    drow[3 * h + u] = d_o * go[u] * (1.0 - go[u]);
                }
            }
        }
        linalg::gemm_tn(self.in_dim, b, g4, x.data(), &dpre, self.wx.grad_mut(), true);
        linalg::gemm_tn(h, b, g4, h_prev.data(), &dpre, self.wh.grad_mut(), true);
        let bias_grad = self.bias.grad_mut();
        for row in dpre.chunks_exact(g4) {
            for (g, &v) in bias_grad.iter_mut().zip(row) {
                *g += v;
            }
        }
        // dx = dpre * wx^T and dh_prev = dpre * wh^T via the transposed form
        let mut dpre_t = vec![0.0; b * g4];
        linalg::transpose(&dpre, b, g4, &mut dpre_t);
        let mut dx_t = vec![0.0; self.in_dim * b];
        linalg::gemm_nn(self.in_dim, g4, b, self.wx.data(), &dpre_t, &mut dx_t, false);
        let mut dx = Tensor::zeros(&[b, self.in_dim]);
        linalg::transpose(&dx_t, self.in_dim, b, dx.data_mut());
        let mut dhp_t = vec![0.0; h * b];
        linalg::gemm_nn(h, g4, b, self.wh.data(), &dpre_t, &mut dhp_t, false);
        let mut dh_prev = Tensor::zeros(&[b, h]);
        linalg::transpose(&dhp_t, h, b, dh_prev.data_mut());
        Ok((dx, dh_prev, dc_prev))
    }
}

/// Single-vector step: returns the new hidden and cell states.
pub fn lstm_cell_step(
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
    params: &LstmParams,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let xt = Tensor::from_vec(&[1, x.len()], x.to_vec())?;
    let ht = Tensor::from_vec(&[1, h_prev.len()], h_prev.to_vec())?;
    let ct = Tensor::from_vec(&[1, c_prev.len()], c_prev.to_vec())?;
    let (h, c) = params.forward(&xt, &ht, &ct, None)?;
    Ok((h.into_data(), c.into_data()))
}
