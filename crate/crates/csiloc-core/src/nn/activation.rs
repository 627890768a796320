//! Rectified linear activation.

use crate::tensor::Tensor;

/// Element-wise `max(0, x)` as a pure operation.
pub fn relu(input: &Tensor) -> Tensor {
    let mut out = input.clone();
    relu_in_place(out.data_mut());
    out
}

/// Element-wise `max(0, x)` over a raw buffer.
pub fn relu_in_place(x: &mut [f64]) {
    for v in x.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

/// Mask an upstream gradient by the forward *output*: slope 1 where the
/// output is positive, 0 elsewhere. The kink at exactly zero uses slope 0.
pub fn relu_backward(dy: &mut [f64], y: &[f64]) {
    assert_eq!(dy.len(), y.len(), "relu_backward: length mismatch");
    for (d, &yv) in dy.iter_mut().zip(y) {
        if yv <= 0.0 {
            *d = 0.0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relu_clamps_negatives_only() {
        let t = Tensor::from_vec(&[5], alloc::vec![-2.0, -0.0, 0.0, 0.5, 3.0]).unwrap();
        let out = relu(&t);
        assert_eq!(out.data(), &[0.0, 0.0, 0.0, 0.5, 3.0]);
    }

    #[test]
    fn backward_masks_by_output_with_zero_slope_at_kink() {
        let y = [0.0, 2.0, 0.0, 1.0];
        let mut dy = [1.0, 1.0, -3.0, 2.0];
        relu_backward(&mut dy, &y);
        assert_eq!(dy, [0.0, 1.0, 0.0, 2.0]);
    }
}
