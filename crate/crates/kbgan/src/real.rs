//! Scalar abstraction so the whole stack runs in either f32 or f64.

use std::fmt::{Debug, Display};

use num_traits::Float;

/// Element type for embeddings, gradients, and optimizer state.
///
/// f64 is the reference precision; tests and oracles use it. f32 halves
/// memory and matches the on-disk checkpoint layout.
pub trait Real: Float + Debug + Display + Send + Sync + 'static {
    fn from_f64(x: f64) -> Self;
    fn into_f64(self) -> f64;
}

impl Real for f32 {
    #[inline]
    fn from_f64(x: f64) -> Self {
        x as f32
    }
    #[inline]
    fn into_f64(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    #[inline]
    fn from_f64(x: f64) -> Self {
        x
    }
    #[inline]
    fn into_f64(self) -> f64 {
        self
    }
}

/// Numerically stable softmax. Probabilities are strictly positive and sum
/// to 1 within 1e-9 even for widely spread inputs.
pub fn softmax_stable(xs: &[f64]) -> Vec<f64> {
    assert!(!xs.is_empty());
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = xs.iter().map(|&x| (x - m).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.iter().map(|&e| e / z).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_sums_to_one_under_extreme_spread() {
        let p = softmax_stable(&[1000.0, 0.0, -1000.0]);
        let sum: f64 = p.iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
        // exp(-2000) underflows to 0, which is still a valid probability
        assert!(p.iter().all(|&x| x >= 0.0 && x.is_finite()));
        assert!(p[0] > 0.999_999);
    }

    #[test]
    fn softmax_is_shift_invariant() {
        let a = softmax_stable(&[0.3, -1.2, 2.5]);
        let b = softmax_stable(&[100.3, 98.8, 102.5]);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}
