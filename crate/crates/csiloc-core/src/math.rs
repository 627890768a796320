//! Scalar float helpers.
//!
//! Transcendentals go through `libm` unconditionally so results are
//! bit-identical with and without the standard library. Square root is the
//! exception: IEEE 754 requires correct rounding from every implementation,
//! so the hardware instruction exposed by `std` gives the same bits as
//! `libm` and is considerably faster in tight loops.

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn tanh(x: f64) -> f64 {
    libm::tanh(x)
}

#[inline]
pub fn cos(x: f64) -> f64 {
    libm::cos(x)
}

#[inline]
pub fn sin(x: f64) -> f64 {
    libm::sin(x)
}

#[inline]
pub fn floor(x: f64) -> f64 {
    libm::floor(x)
}

#[inline]
pub fn round(x: f64) -> f64 {
    libm::round(x)
}

#[cfg(feature = "std")]
#[inline]
pub fn sqrt(x: f64) -> f64 {
    x.sqrt()
}

#[cfg(not(feature = "std"))]
#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

/// Fused multiply-add `x * y + z` with a single rounding. Correct rounding
/// is mandated for this operation, so the hardware instruction and the
/// `libm` fallback return identical bits.
#[cfg(feature = "std")]
#[inline]
pub fn fma(x: f64, y: f64, z: f64) -> f64 {
    x.mul_add(y, z)
}

#[cfg(not(feature = "std"))]
#[inline]
pub fn fma(x: f64, y: f64, z: f64) -> f64 {
    libm::fma(x, y, z)
}

/// Euclidean distance between two points.
#[inline]
pub fn distance(a: (f64, f64), b: (f64, f64)) -> f64 {
    let dx = a.0 - b.0;
    let dy = a.1 - b.1;
    sqrt(dx * dx + dy * dy)
}

/// Numerically stable logistic function.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + exp(-x))
    } else {
        let e = exp(x);
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_matches_definition_and_is_symmetric() {
        assert_eq!(sigmoid(0.0), 0.5);
        for &x in &[-30.0, -2.5, -1.0, 0.3, 4.0, 25.0] {
            let s = sigmoid(x);
            assert!(s.is_finite() && s > 0.0 && s < 1.0);
            assert!((s + sigmoid(-x) - 1.0).abs() < 1e-15);
        }
        assert!((sigmoid(1.0) - 1.0 / (1.0 + (-1.0f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn sqrt_matches_libm_bitwise() {
        for &x in &[0.0, 1.0, 2.0, 0.3, 1e-12, 7.5e11, core::f64::consts::PI] {
            assert_eq!(sqrt(x).to_bits(), libm::sqrt(x).to_bits());
        }
    }

    #[test]
    fn distance_is_euclidean() {
        assert_eq!(distance((0.0, 0.0), (3.0, 4.0)), 5.0);
        assert_eq!(distance((1.0, 1.0), (1.0, 1.0)), 0.0);
    }
}
