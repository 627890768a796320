//! Same-padding 2-D convolution over batched height x width x channel
//! tensors, implemented as im2col plus a matrix product.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg;
use crate::nn::init;
use crate::tensor::Tensor;

/// Convolution with stride 1 and zero padding chosen so the spatial output
/// size equals the input size. Kernels are stored `[kh, kw, cin, cout]`,
/// which flattens to the `[kh*kw*cin, cout]` layout the matrix product
/// wants.
#[derive(Debug, Clone)]
pub struct Conv2d {
    pub kernels: Tensor,
    pub bias: Tensor,
    kh: usize,
    kw: usize,
    cin: usize,
    cout: usize,
}

/// Forward-pass state the backward pass reuses: the unfolded input patches
/// and the input shape.
#[derive(Debug, Default)]
pub struct Conv2dCache {
    patches: Vec<f64>,
    dims: [usize; 4],
}

impl Conv2d {
    pub fn new(kh: usize, kw: usize, cin: usize, cout: usize) -> Result<Self> {
        if kh == 0 || kw == 0 || cin == 0 || cout == 0 {
            return Err(Error::Config(format!(
                "convolution needs positive dimensions, got {kh}x{kw}x{cin}x{cout}"
            )));
        }
        if kh % 2 == 0 || kw % 2 == 0 {
            return Err(Error::Config(format!(
                "same-padding convolution needs odd kernel sides, got {kh}x{kw}"
            )));
        }
        Ok(Conv2d {
            kernels: Tensor::zeros(&[kh, kw, cin, cout]),
            bias: Tensor::zeros(&[cout]),
            kh,
            kw,
            cin,
            cout,
        })
    }

    pub fn init_kaiming(&mut self, rng: &mut ChaCha8Rng) {
        init::kaiming_uniform(self.kernels.data_mut(), self.kh * self.kw * self.cin, rng);
        self.bias.data_mut().fill(0.0);
    }

    pub fn out_channels(&self) -> usize {
        self.cout
    }

    pub fn in_channels(&self) -> usize {
        self.cin
    }

    pub fn kernel_dims(&self) -> (usize, usize) {
        (self.kh, self.kw)
    }

    fn check_input(&self, x: &Tensor) -> Result<[usize; 4]> {
        let d = x.dims();
        if d.len() != 4 || d[3] != self.cin {
            return Err(Error::Shape(format!(
                "conv input: expected [batch, h, w, {}], got {d:?}",
                self.cin
            )));
        }
        Ok([d[0], d[1], d[2], d[3]])
    }

    /// Unfold `x` into one row of `kh*kw*cin` values per output pixel.
    /// Out-of-image taps are zero. Rows covering interior pixels copy
    /// `kw*cin` contiguous values per kernel row.
    fn im2col(&self, x: &Tensor, dims: [usize; 4], patches: &mut Vec<f64>) {
        let [b, h, w, cin] = dims;
        let (kh, kw) = (self.kh, self.kw);
        let (ph, pw) = (kh / 2, kw / 2);
        let row_len = kh * kw * cin;
        patches.clear();
        patches.resize(b * h * w * row_len, 0.0);
        let src = x.data();
        for bi in 0..b {
            let img = &src[bi * h * w * cin..][..h * w * cin];
            let prow_base = bi * h * w;
            for y in 0..h {
                for xo in 0..w {
                    let dst = &mut patches[(prow_base + y * w + xo) * row_len..][..row_len];
                    for ky in 0..kh {
                        let sy = y as isize + ky as isize - ph as isize;
                        if sy < 0 || sy >= h as isize {
                            continue;
                        }
                        // clamp the kernel-row span to the image border
                        let sx0 = xo as isize - pw as isize;
                        let from = (-sx0).max(0) as usize;
                        let to = kw.min((w as isize - sx0) as usize);
                        if from >= to {
                            continue;
                        }
                        let src_off = (sy as usize * w) as isize + sx0;
                        let src_start = ((src_off + from as isize) as usize) * cin;
                        let n = (to - from) * cin;
                        dst[ky * kw * cin + from * cin..][..n]
                            .copy_from_slice(&img[src_start..][..n]);
                    }
                }
            }
        }
    }

    /// Forward over `[batch, h, w, cin]`, producing `[batch, h, w, cout]`.
    /// Pass a cache when a backward pass will follow.
    pub fn forward(&self, x: &Tensor, cache: Option<&mut Conv2dCache>) -> Result<Tensor> {
        let dims = self.check_input(x)?;
        let [b, h, w, _] = dims;
        let row_len = self.kh * self.kw * self.cin;
        let mut local = Vec::new();
        let patches = match cache {
            Some(c) => {
                c.dims = dims;
                &mut c.patches
            }
            None => &mut local,
        };
        self.im2col(x, dims, patches);
        let rows = b * h * w;
        let mut y = Tensor::zeros(&[b, h, w, self.cout]);
        linalg::gemm_nn(
            rows,
            row_len,
            self.cout,
            patches,
            self.kernels.data(),
            y.data_mut(),
            false,
        );
        let bias = self.bias.data();
        for row in y.data_mut().chunks_exact_mut(self.cout) {
            for (v, &bv) in row.iter_mut().zip(bias) {
                *v += bv;
            }
        }
        Ok(y)
    }

    /// Backward pass against the cached forward state. Gradients accumulate
    /// into the kernel and bias tensors; the input gradient is returned when
    /// `need_dx` is set.
    pub fn backward(
        &mut self,
        dy: &Tensor,
        cache: &Conv2dCache,
        need_dx: bool,
    ) -> Result<Option<Tensor>> {
        let [b, h, w, _] = cache.dims;
        if cache.patches.is_empty() {
            return Err(Error::Usage("conv backward without cached forward".into()));
        }
        let d = dy.dims();
        if d != [b, h, w, self.cout] {
            return Err(Error::Shape(format!(
                "conv upstream gradient: expected [{b}, {h}, {w}, {}], got {d:?}",
                self.cout
            )));
        }
        let rows = b * h * w;
        let row_len = self.kh * self.kw * self.cin;
        linalg::gemm_tn(
            row_len,
            rows,
            self.cout,
            &cache.patches,
            dy.data(),
            self.kernels.grad_mut(),
            true,
        );
        let bias_grad = self.bias.grad_mut();
        for row in dy.data().chunks_exact(self.cout) {
            for (g, &v) in bias_grad.iter_mut().zip(row) {
                *g += v;
            }
        }
        if !need_dx {
            return Ok(None);
        }
        let mut dpatches = vec![0.0; rows * row_len];
        linalg::gemm_nt(
            rows,
            self.cout,
            row_len,
            dy.data(),
            self.kernels.data(),
            &mut dpatches,
            false,
        );
        let mut dx = Tensor::zeros(&[b, h, w, self.cin]);
        self.col2im(&dpatches, cache.dims, dx.data_mut());
        Ok(Some(dx))
    }

    /// Scatter-add of patch-row gradients back onto the input image,
    /// mirroring `im2col`.
    fn col2im(&self, dpatches: &[f64], dims: [usize; 4], dx: &mut [f64]) {
        let [b, h, w, cin] = dims;
        let (kh, kw) = (self.kh, self.kw);
        let (ph, pw) = (kh / 2, kw / 2);
        let row_len = kh * kw * cin;
        for bi in 0..b {
            let img = &mut dx[bi * h * w * cin..][..h * w * cin];
            let prow_base = bi * h * w;
            for y in 0..h {
                for xo in 0..w {
                    let src = &dpatches[(prow_base + y * w + xo) * row_len..][..row_len];
                    for ky in 0..kh {
                        let sy = y as isize + ky as isize - ph as isize;
                        if sy < 0 || sy >= h as isize {
                            continue;
                        }
                        let sx0 = xo as isize - pw as isize;
                        let from = (-sx0).max(0) as usize;
                        let to = kw.min((w as isize - sx0) as usize);
                        if from >= to {
                            continue;
                        }
                        let src_off = (sy as usize * w) as isize + sx0;
                        let dst_start = ((src_off + from as isize) as usize) * cin;
                        let n = (to - from) * cin;
                        let srow = &src[ky * kw * cin + from * cin..][..n];
                        for (d, s) in img[dst_start..][..n].iter_mut().zip(srow) {
                            *d += s;
                        }
                    }
                }
            }
        }
    }
}

/// Single-image forward: `input` is `[h, w, cin]`, `kernels`
/// `[kh, kw, cin, cout]`, output `[h, w, cout]`.
pub fn conv2d_apply(input: &Tensor, kernels: &Tensor, bias: &[f64]) -> Result<Tensor> {
    let kd = kernels.dims();
    if kd.len() != 4 {
        return Err(Error::Shape(format!("kernels must be 4-d, got {kd:?}")));
    }
    let id = input.dims();
    if id.len() != 3 {
        return Err(Error::Shape(format!("input must be 3-d, got {id:?}")));
    }
    let mut layer = Conv2d::new(kd[0], kd[1], kd[2], kd[3])?;
    if bias.len() != kd[3] {
        return Err(Error::Shape(format!(
            "bias length {} against {} output channels",
            bias.len(),
            kd[3]
        )));
    }
    layer.kernels.data_mut().copy_from_slice(kernels.data());
    layer.bias.data_mut().copy_from_slice(bias);
    let mut batched = input.clone();
    batched.reshape(&[1, id[0], id[1], id[2]])?;
    let mut out = layer.forward(&batched, None)?;
    out.reshape(&[id[0], id[1], kd[3]])?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    // A 3x3 all-ones kernel over an all-ones image counts the in-image
    // taps: 9 in the interior, 6 on edges, 4 in corners.
    #[test]
    fn same_padding_tap_counts() {
        let input = Tensor::from_vec(&[4, 5, 1], vec![1.0; 20]).unwrap();
        let kernels = Tensor::from_vec(&[3, 3, 1, 1], vec![1.0; 9]).unwrap();
        let out = conv2d_apply(&input, &kernels, &[0.0]).unwrap();
        assert_eq!(out.dims(), &[4, 5, 1]);
        let v = |y: usize, x: usize| out.data()[y * 5 + x];
        assert_eq!(v(1, 2), 9.0);
        assert_eq!(v(0, 2), 6.0);
        assert_eq!(v(1, 0), 6.0);
        assert_eq!(v(0, 0), 4.0);
        assert_eq!(v(3, 4), 4.0);
    }

    #[test]
    fn channels_mix_and_bias_adds() {
        // 1x1 kernel over 2 input channels: out = 2*c0 + 3*c1 + bias
        let input = Tensor::from_vec(&[1, 2, 2], vec![1.0, 10.0, 4.0, 20.0]).unwrap();
        let kernels = Tensor::from_vec(&[1, 1, 2, 1], vec![2.0, 3.0]).unwrap();
        let out = conv2d_apply(&input, &kernels, &[0.5]).unwrap();
        assert_eq!(out.data(), &[32.5, 68.5]);
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = crate::rng::stream(21, &[rng_tag()]);
        let mut layer = Conv2d::new(3, 3, 2, 3).unwrap();
        layer.init_kaiming(&mut rng);
        let x = Tensor::from_fn(&[2, 4, 5, 2], |i| ((i * 37 + 11) % 17) as f64 / 17.0 - 0.4);
        // loss = sum of outputs, so upstream gradient is all ones
        let mut cache = Conv2dCache::default();
        let y = layer.forward(&x, Some(&mut cache)).unwrap();
        let dy = Tensor::from_vec(y.dims(), vec![1.0; y.len()]).unwrap();
        let dx = layer.backward(&dy, &cache, true).unwrap().unwrap();

        let eps = 1e-6;
        // probe a few kernel entries
        for &ki in &[0usize, 7, 23, 53] {
            let orig = layer.kernels.data()[ki];
            layer.kernels.data_mut()[ki] = orig + eps;
            let up: f64 = layer.forward(&x, None).unwrap().data().iter().sum();
            layer.kernels.data_mut()[ki] = orig - eps;
            let down: f64 = layer.forward(&x, None).unwrap().data().iter().sum();
            layer.kernels.data_mut()[ki] = orig;
            let fd = (up - down) / (2.0 * eps);
            let an = layer.kernels.grad().unwrap()[ki];
            assert!((fd - an).abs() < 1e-5 * (1.0 + an.abs()), "kernel {ki}: {fd} vs {an}");
        }
        // probe a few input entries
        let mut x2 = x.clone();
        for &xi in &[0usize, 13, 39, 79] {
            let orig = x2.data()[xi];
            x2.data_mut()[xi] = orig + eps;
            let up: f64 = layer.forward(&x2, None).unwrap().data().iter().sum();
            x2.data_mut()[xi] = orig - eps;
            let down: f64 = layer.forward(&x2, None).unwrap().data().iter().sum();
            x2.data_mut()[xi] = orig;
            let fd = (up - down) / (2.0 * eps);
            let an = dx.data()[xi];
            assert!((fd - an).abs() < 1e-5 * (1.0 + an.abs()), "input {xi}: {fd} vs {an}");
        }
    }

    fn rng_tag() -> u64 {
        crate::rng::role::GRADCHECK
    }

    #[test]
    fn rejects_even_kernels_and_bad_shapes() {
        assert!(Conv2d::new(2, 3, 1, 1).is_err());
        let layer = Conv2d::new(3, 3, 2, 1).unwrap();
        let bad = Tensor::zeros(&[1, 4, 4, 3]);
        assert!(matches!(layer.forward(&bad, None), Err(Error::Shape(_))));
    }
}
