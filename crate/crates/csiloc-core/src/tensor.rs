//! Dense row-major `f64` tensors with optional gradient storage.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// A dense tensor. The shape is a list of dimensions, innermost last, and
/// the data is a single row-major buffer. A gradient buffer of the same
/// length can be attached lazily; parameters use it, activations usually
/// don't.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    dims: Vec<usize>,
    data: Vec<f64>,
    grad: Option<Vec<f64>>,
}

fn count(dims: &[usize]) -> usize {
    dims.iter().product()
}

impl Tensor {
    pub fn zeros(dims: &[usize]) -> Self {
        Tensor {
            dims: dims.to_vec(),
            data: vec![0.0; count(dims)],
            grad: None,
        }
    }

    pub fn from_vec(dims: &[usize], data: Vec<f64>) -> Result<Self> {
        if data.len() != count(dims) {
            return Err(Error::Shape(format!(
                "{} values do not fill shape {:?}",
                data.len(),
                dims
            )));
        }
        Ok(Tensor {
            dims: dims.to_vec(),
            data,
            grad: None,
        })
    }

    pub fn from_fn(dims: &[usize], mut f: impl FnMut(usize) -> f64) -> Self {
        let n = count(dims);
        let mut data = Vec::with_capacity(n);
        for i in 0..n {
            data.push(f(i));
        }
        Tensor {
            dims: dims.to_vec(),
            data,
            grad: None,
        }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Reinterpret the buffer under a new shape of the same total size.
    pub fn reshape(&mut self, dims: &[usize]) -> Result<()> {
        if count(dims) != self.data.len() {
            return Err(Error::Shape(format!(
                "cannot view {} values as {:?}",
                self.data.len(),
                dims
            )));
        }
        self.dims = dims.to_vec();
        Ok(())
    }

    pub fn grad(&self) -> Option<&[f64]> {
        self.grad.as_deref()
    }

    /// Gradient buffer, allocated zeroed on first use.
    pub fn grad_mut(&mut self) -> &mut [f64] {
        let n = self.data.len();
        self.grad.get_or_insert_with(|| vec![0.0; n])
    }

    pub fn zero_grad(&mut self) {
        if let Some(g) = self.grad.as_mut() {
            g.fill(0.0);
        }
    }

    /// Split borrow for optimizers: the parameter buffer mutably and the
    /// gradient buffer read-only, in one call.
    pub fn data_and_grad(&mut self) -> Result<(&mut [f64], &[f64])> {
        match self.grad.as_deref() {
            Some(g) => Ok((&mut self.data, g)),
            None => Err(Error::Usage("parameter update without gradients".into())),
        }
    }

    /// Drop the gradient buffer, e.g. before long-term storage.
    pub fn clear_grad(&mut self) {
        self.grad = None;
    }

    /// Reject NaN or infinity anywhere in the data buffer.
    pub fn check_finite(&self, what: &str) -> Result<()> {
        for (i, v) in self.data.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("{what}[{i}] = {v}")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_vec_enforces_size() {
        assert!(Tensor::from_vec(&[2, 3], vec![0.0; 6]).is_ok());
        assert!(Tensor::from_vec(&[2, 3], vec![0.0; 5]).is_err());
    }

    #[test]
    fn reshape_preserves_data_and_rejects_bad_sizes() {
        let mut t = Tensor::from_fn(&[2, 6], |i| i as f64);
        t.reshape(&[3, 4]).unwrap();
        assert_eq!(t.dims(), &[3, 4]);
        assert_eq!(t.data()[7], 7.0);
        assert!(t.reshape(&[5, 2]).is_err());
    }

    #[test]
    fn grad_is_lazy_and_zeroable() {
        let mut t = Tensor::zeros(&[4]);
        assert!(t.grad().is_none());
        t.grad_mut()[2] = 5.0;
        assert_eq!(t.grad().unwrap(), &[0.0, 0.0, 5.0, 0.0]);
        t.zero_grad();
        assert_eq!(t.grad().unwrap(), &[0.0; 4]);
    }

    #[test]
    fn check_finite_reports_position() {
        let mut t = Tensor::zeros(&[3]);
        t.data_mut()[1] = f64::NAN;
        let err = t.check_finite("x").unwrap_err();
        assert!(matches!(err, Error::NonFinite(_)));
    }
}
