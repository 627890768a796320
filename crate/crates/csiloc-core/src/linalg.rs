//! Serial matrix kernels for the neural engine.
//!
//! Everything is `f64` and row-major. Three product forms cover the forward
//! and backward passes of the dense and convolution layers:
//!
//! * [`gemm_nn`]: `C = A * B` (forward activations),
//! * [`gemm_tn`]: `C = A^T * B` (weight gradients, where the shared dimension
//!   is the batch),
//! * [`gemm_nt`]: `C = A * B^T` (input gradients against a small weight
//!   matrix).
//!
//! The heavy `nn` path tiles the output into 8x8 register blocks and copies
//! each `B` panel into a contiguous scratch strip first. Wide weight
//! matrices have rows tens of kilobytes apart, which defeats hardware
//! prefetch if the kernel walks them column-block by column-block; the
//! packed strip turns those loads into sequential, L2-resident traffic and
//! the weight matrix itself streams from memory exactly once per call. Loop
//! order is fixed, so results are bit-identical from run to run on the same
//! build.

use alloc::vec;
use alloc::vec::Vec;

/// Rows of C produced per micro-kernel call.
const MR: usize = 8;
/// Columns of C produced per micro-kernel call (one AVX-512 vector of f64).
const NR: usize = 8;
/// Shared-dimension panel height: a `KC x NC` block of B is packed at once.
const KC: usize = 384;
/// Column strip width; the packed strip (`KC * NC` doubles) stays in L2.
const NC: usize = 256;

fn check(len: usize, rows: usize, cols: usize, what: &str) {
    assert!(
        len == rows * cols,
        "{what}: buffer holds {len} values, expected {rows}x{cols}"
    );
}

/// `R` rows by up to 8 columns of output, accumulated over `kn` shared
/// steps against one packed B strip. AVX-512 form; the whole register tile
/// lives in 8 vector registers, and the `width < 8` tail is handled with
/// masked loads and stores.
#[cfg(all(target_arch = "x86_64", target_feature = "avx512f", target_feature = "fma"))]
#[inline(always)]
#[allow(clippy::too_many_arguments)]
fn micro<const R: usize>(
    a: &[f64],
    pb: &[f64],
    c: &mut [f64],
    k: usize,
    n: usize,
    strip: usize,
    i0: usize,
    j: usize,
    off: usize,
    width: usize,
    k0: usize,
    kn: usize,
    store: bool,
) {
    use core::arch::x86_64::*;
    debug_assert!(width <= NR && width >= 1);
    // Bounds established once here; the pointer arithmetic below stays
    // inside these slices.
    let arows: [&[f64]; R] = core::array::from_fn(|r| &a[(i0 + r) * k + k0..][..kn]);
    assert!(off + NR <= strip && strip * kn <= pb.len());
    assert!((i0 + R - 1) * n + j + width <= c.len());
    let mask: __mmask8 = ((1u16 << width) - 1) as __mmask8;
    unsafe {
        let mut q = [_mm512_setzero_pd(); R];
        let mut bp = pb.as_ptr().add(off);
        for t in 0..kn {
            let bv = _mm512_loadu_pd(bp);
            for r in 0..R {
                let ar = _mm512_set1_pd(*arows[r].get_unchecked(t));
                q[r] = _mm512_fmadd_pd(ar, bv, q[r]);
            }
            bp = bp.add(strip);
        }
        for r in 0..R {
            let cp = c.as_mut_ptr().add((i0 + r) * n + j);
            let out = if store {
                q[r]
            } else {
                let cur = if width == NR {
                    _mm512_loadu_pd(cp)
                } else {
                    _mm512_maskz_loadu_pd(mask, cp)
                };
                _mm512_add_pd(cur, q[r])
            };
            if width == NR {
                _mm512_storeu_pd(cp, out);
            } else {
                _mm512_mask_storeu_pd(cp, mask, out);
            }
        }
    }
}

/// Portable form of the micro-kernel. Uses fused multiply-add through
/// `math::fma`, which is correctly rounded and therefore produces exactly
/// the same bits as the vector instructions above.
#[cfg(not(all(target_arch = "x86_64", target_feature = "avx512f", target_feature = "fma")))]
#[inline(always)]
#[allow(clippy::too_many_arguments)]
fn micro<const R: usize>(
    a: &[f64],
    pb: &[f64],
    c: &mut [f64],
    k: usize,
    n: usize,
    strip: usize,
    i0: usize,
    j: usize,
    off: usize,
    width: usize,
    k0: usize,
    kn: usize,
    store: bool,
) {
    let arows: [&[f64]; R] = core::array::from_fn(|r| &a[(i0 + r) * k + k0..][..kn]);
    let mut q = [[0.0f64; NR]; R];
    for t in 0..kn {
        let bv = &pb[t * strip + off..][..NR];
        for r in 0..R {
            let ar = arows[r][t];
            for l in 0..NR {
                q[r][l] = crate::math::fma(ar, bv[l], q[r][l]);
            }
        }
    }
    for r in 0..R {
        let cr = &mut c[(i0 + r) * n + j..][..width];
        for l in 0..width {
            if store {
                cr[l] = q[r][l];
            } else {
                cr[l] += q[r][l];
            }
        }
    }
}

#[inline(always)]
#[allow(clippy::too_many_arguments)]
fn sweep<const R: usize>(
    a: &[f64],
    pb: &[f64],
    c: &mut [f64],
    k: usize,
    n: usize,
    strip: usize,
    i0: usize,
    j0: usize,
    jn: usize,
    k0: usize,
    kn: usize,
    store: bool,
) {
    let mut off = 0;
    while off < jn {
        let width = NR.min(jn - off);
        micro::<R>(a, pb, c, k, n, strip, i0, j0 + off, off, width, k0, kn, store);
        off += width;
    }
}

fn drive(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], c: &mut [f64], acc: bool) {
    assert!(m > 0 && k > 0 && n > 0, "matrix product with an empty dimension");
    // Packed strip of B, reused across panels so it stays cache-resident.
    let mut pb: Vec<f64> = Vec::new();
    let mut j0 = 0;
    while j0 < n {
        let jn = NC.min(n - j0);
        let strip = (jn + NR - 1) / NR * NR;
        let mut k0 = 0;
        while k0 < k {
            let kn = KC.min(k - k0);
            pb.clear();
            pb.resize(strip * kn, 0.0);
            for t in 0..kn {
                let src = &b[(k0 + t) * n + j0..][..jn];
                pb[t * strip..t * strip + jn].copy_from_slice(src);
            }
            // First panel writes, later panels accumulate on top.
            let store = !acc && k0 == 0;
            let mut i0 = 0;
            while i0 < m {
                let rows = m - i0;
                let take = if rows >= MR {
                    sweep::<MR>(a, &pb, c, k, n, strip, i0, j0, jn, k0, kn, store);
                    MR
                } else if rows >= 4 {
                    sweep::<4>(a, &pb, c, k, n, strip, i0, j0, jn, k0, kn, store);
                    4
                } else if rows >= 2 {
                    sweep::<2>(a, &pb, c, k, n, strip, i0, j0, jn, k0, kn, store);
                    2
                } else {
                    sweep::<1>(a, &pb, c, k, n, strip, i0, j0, jn, k0, kn, store);
                    1
                };
                i0 += take;
            }
            k0 += kn;
        }
        j0 += jn;
    }
}

/// `C[m x n] = A[m x k] * B[k x n]`, adding into C when `acc` is set.
pub fn gemm_nn(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], c: &mut [f64], acc: bool) {
    check(a.len(), m, k, "gemm_nn A");
    check(b.len(), k, n, "gemm_nn B");
    check(c.len(), m, n, "gemm_nn C");
    drive(m, k, n, a, b, c, acc);
}

/// `C[m x n] = A^T * B` where A is stored `k x m`, adding into C when `acc`
/// is set. The shared dimension runs over the rows of both inputs, which is
/// the natural layout for batch-summed weight gradients; A is transposed
/// into scratch first (the batch dimension keeps it small).
pub fn gemm_tn(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], c: &mut [f64], acc: bool) {
    check(a.len(), k, m, "gemm_tn A");
    check(b.len(), k, n, "gemm_tn B");
    check(c.len(), m, n, "gemm_tn C");
    let mut at = vec![0.0; m * k];
    transpose(a, k, m, &mut at);
    drive(m, k, n, &at, b, c, acc);
}

/// `C[m x n] = A[m x k] * B^T` where B is stored `n x k`, adding into C when
/// `acc` is set. Plain row-dot form; intended for small B (the shared
/// dimension here is a channel count, not a batch or feature width).
pub fn gemm_nt(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], c: &mut [f64], acc: bool) {
    check(a.len(), m, k, "gemm_nt A");
    check(b.len(), n, k, "gemm_nt B");
    check(c.len(), m, n, "gemm_nt C");
    for i in 0..m {
        let ar = &a[i * k..][..k];
        let cr = &mut c[i * n..][..n];
        for j in 0..n {
            let s = dot(ar, &b[j * k..][..k]);
            if acc {
                cr[j] += s;
            } else {
                cr[j] = s;
            }
        }
    }
}

/// Dot product with a fixed accumulation order (16 running lanes, then a
/// fixed reduction tree), fast and reproducible.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "dot: length mismatch");
    let mut lanes = [0.0f64; 16];
    let chunks = a.len() / 16;
    for t in 0..chunks {
        let av = &a[t * 16..][..16];
        let bv = &b[t * 16..][..16];
        for l in 0..16 {
            lanes[l] += av[l] * bv[l];
        }
    }
    let mut tail = 0.0;
    for t in chunks * 16..a.len() {
        tail += a[t] * b[t];
    }
    let mut s = 0.0;
    for l in 0..16 {
        s += lanes[l];
    }
    s + tail
}

/// `dst[cols x rows] = src[rows x cols]` transposed.
pub fn transpose(src: &[f64], rows: usize, cols: usize, dst: &mut [f64]) {
    check(src.len(), rows, cols, "transpose src");
    check(dst.len(), cols, rows, "transpose dst");
    const TB: usize = 32;
    let mut r0 = 0;
    while r0 < rows {
        let rn = TB.min(rows - r0);
        let mut c0 = 0;
        while c0 < cols {
            let cn = TB.min(cols - c0);
            for r in r0..r0 + rn {
                for c in c0..c0 + cn {
                    dst[c * rows + r] = src[r * cols + c];
                }
            }
            c0 += cn;
        }
        r0 += rn;
    }
}
