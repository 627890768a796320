//! Location losses.
//!
//! Both phases train on the straight Euclidean distance between predicted
//! and true coordinates (not its square): single positions for the first
//! phase, per-step means over a trajectory for the second. The gradient of
//! `|e|` is the unit vector `e/|e|`, taken as zero at `e = 0` where the
//! norm has no derivative.

use alloc::format;

use crate::error::{Error, Result};
use crate::math;
use crate::tensor::Tensor;

/// Distance between one predicted and one true location.
pub fn location_loss(pred: (f64, f64), target: (f64, f64)) -> f64 {
    math::distance(pred, target)
}

/// Gradient of [`location_loss`] with respect to the prediction.
pub fn location_loss_grad(pred: (f64, f64), target: (f64, f64)) -> (f64, f64) {
    let (ex, ey) = (pred.0 - target.0, pred.1 - target.1);
    let d = math::sqrt(ex * ex + ey * ey);
    if d == 0.0 {
        (0.0, 0.0)
    } else {
        (ex / d, ey / d)
    }
}

fn check_pair(pred: &Tensor, targets: &[f64], what: &str) -> Result<usize> {
    let d = pred.dims();
    if d.len() != 2 || d[1] != 2 {
        return Err(Error::Shape(format!(
            "{what}: predictions must be [batch, 2], got {d:?}"
        )));
    }
    if targets.len() != pred.len() {
        return Err(Error::Shape(format!(
            "{what}: {} target values against {} predictions",
            targets.len(),
            pred.len()
        )));
    }
    Ok(d[0])
}

/// Mean distance over a `[batch, 2]` prediction tensor against flat
/// `[batch*2]` targets.
pub fn batch_loss(pred: &Tensor, targets: &[f64]) -> Result<f64> {
    let b = check_pair(pred, targets, "batch loss")?;
    let mut total = 0.0;
    for (p, t) in pred.data().chunks_exact(2).zip(targets.chunks_exact(2)) {
        total += math::distance((p[0], p[1]), (t[0], t[1]));
    }
    Ok(total / b as f64)
}

/// Gradient of [`batch_loss`]: fills `dpred` (same shape as `pred`).
pub fn batch_loss_grad(pred: &Tensor, targets: &[f64], dpred: &mut Tensor) -> Result<()> {
    let b = check_pair(pred, targets, "batch loss gradient")?;
    if dpred.dims() != pred.dims() {
        return Err(Error::Shape("gradient tensor shape mismatch".into()));
    }
    let scale = 1.0 / b as f64;
    for ((p, t), g) in pred
        .data()
        .chunks_exact(2)
        .zip(targets.chunks_exact(2))
        .zip(dpred.data_mut().chunks_exact_mut(2))
    {
        let (gx, gy) = location_loss_grad((p[0], p[1]), (t[0], t[1]));
        g[0] = gx * scale;
        g[1] = gy * scale;
    }
    Ok(())
}

/// Trajectory loss: the mean over steps of per-step distances, for one
/// sequence of predictions.
pub fn sequence_loss(preds: &[(f64, f64)], targets: &[(f64, f64)]) -> Result<f64> {
    if preds.is_empty() || preds.len() != targets.len() {
        return Err(Error::Shape(format!(
            "sequence loss: {} predictions against {} targets",
            preds.len(),
            targets.len()
        )));
    }
    let mut total = 0.0;
    for (p, t) in preds.iter().zip(targets) {
        total += math::distance(*p, *t);
    }
    Ok(total / preds.len() as f64)
}

/// Per-step gradients for [`sequence_loss`].
pub fn sequence_loss_grad(
    preds: &[(f64, f64)],
    targets: &[(f64, f64)],
) -> Result<alloc::vec::Vec<(f64, f64)>> {
    if preds.is_empty() || preds.len() != targets.len() {
        return Err(Error::Shape(format!(
            "sequence loss gradient: {} predictions against {} targets",
            preds.len(),
            targets.len()
        )));
    }
    let scale = 1.0 / preds.len() as f64;
    Ok(preds
        .iter()
        .zip(targets)
        .map(|(p, t)| {
            let (gx, gy) = location_loss_grad(*p, *t);
            (gx * scale, gy * scale)
        })
        .collect())
}
