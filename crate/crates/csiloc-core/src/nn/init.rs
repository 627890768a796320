//! Weight initialization rules.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::math;

/// Kaiming-style uniform fill, `+/-sqrt(6 / fan_in)`, for layers feeding a
/// ReLU.
pub fn kaiming_uniform(data: &mut [f64], fan_in: usize, rng: &mut ChaCha8Rng) {
    assert!(fan_in > 0, "fan_in must be positive");
    let bound = math::sqrt(6.0 / fan_in as f64);
    for v in data.iter_mut() {
        *v = rng.random_range(-bound..bound);
    }
}

/// Uniform fill `+/-1/sqrt(fan_in)`, the customary default for recurrent and
/// linear-output weights.
pub fn scaled_uniform(data: &mut [f64], fan_in: usize, rng: &mut ChaCha8Rng) {
    assert!(fan_in > 0, "fan_in must be positive");
    let bound = 1.0 / math::sqrt(fan_in as f64);
    for v in data.iter_mut() {
        *v = rng.random_range(-bound..bound);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn kaiming_stays_in_bounds_and_is_deterministic() {
        let mut a = [0.0; 512];
        let mut b = [0.0; 512];
        kaiming_uniform(&mut a, 25, &mut rng::stream(5, &[rng::role::CNN_INIT]));
        kaiming_uniform(&mut b, 25, &mut rng::stream(5, &[rng::role::CNN_INIT]));
        assert_eq!(a, b);
        let bound = (6.0f64 / 25.0).sqrt();
        assert!(a.iter().all(|v| v.abs() < bound));
        // both signs should occur
        assert!(a.iter().any(|v| *v > 0.0) && a.iter().any(|v| *v < 0.0));
    }

    #[test]
    fn scaled_uniform_bound_tracks_fan_in() {
        let mut a = [0.0; 256];
        scaled_uniform(&mut a, 400, &mut rng::stream(5, &[rng::role::LSTM_INIT]));
        assert!(a.iter().all(|v| v.abs() < 0.05));
    }
}
