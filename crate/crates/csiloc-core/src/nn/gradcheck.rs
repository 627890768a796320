//! Central-difference verification of analytic gradients.

use alloc::vec::Vec;

/// Result of comparing one gradient buffer against finite differences.
#[derive(Debug, Clone, Default)]
pub struct GradCheck {
    /// Largest deviation in the combined tolerance metric (1 = at the
    /// limit, below 1 passes).
    pub worst_ratio: f64,
    pub worst_index: usize,
    pub worst_analytic: f64,
    pub worst_numeric: f64,
    pub checked: usize,
}

impl GradCheck {
    pub fn passed(&self) -> bool {
        self.worst_ratio <= 1.0
    }
}

/// Probe `indices` of a parameter buffer: for each, evaluate the loss with
/// the entry displaced by +/-eps, form the central difference, and compare it
/// to `analytic` under `|fd - an| <= abs_tol + rel_tol * max(|fd|, |an|)`.
///
/// `loss` receives the parameter buffer to mutate and must leave it as it
/// found it between calls (this helper restores the probed entry itself).
pub fn check_entries(
    params: &mut [f64],
    analytic: &[f64],
    indices: &[usize],
    eps: f64,
    rel_tol: f64,
    abs_tol: f64,
    mut loss: impl FnMut(&[f64]) -> f64,
) -> GradCheck {
    assert_eq!(params.len(), analytic.len(), "gradient length mismatch");
    let mut report = GradCheck::default();
    for &i in indices {
        let orig = params[i];
        params[i] = orig + eps;
        let up = loss(params);
        params[i] = orig - eps;
        let down = loss(params);
        params[i] = orig;
        let fd = (up - down) / (2.0 * eps);
        let an = analytic[i];
        let tol = abs_tol + rel_tol * fd.abs().max(an.abs());
        let ratio = if tol > 0.0 { (fd - an).abs() / tol } else { f64::INFINITY };
        if ratio > report.worst_ratio {
            report.worst_ratio = ratio;
            report.worst_index = i;
            report.worst_analytic = an;
            report.worst_numeric = fd;
        }
        report.checked += 1;
    }
    report
}

/// Evenly spread probe indices over a buffer of `len` entries.
pub fn probe_indices(len: usize, count: usize) -> Vec<usize> {
    if len == 0 || count == 0 {
        return Vec::new();
    }
    let count = count.min(len);
    (0..count).map(|i| i * len / count).collect()
}
