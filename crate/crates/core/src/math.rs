//! Scalar numeric helpers.
//!
//! All transcendentals are routed through `libm` rather than the platform's
//! math library so that results are bit-identical on every target and under
//! `no_std`. Reproducibility across reruns is a hard requirement for the
//! training loop, and the platform `tanh`/`exp` are allowed to differ by a few
//! ulps between libc implementations.

/// Hyperbolic tangent.
#[inline]
pub fn tanh(x: f64) -> f64 {
    libm::tanh(x)
}

/// Natural exponential.
#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

/// Natural logarithm.
#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

/// Square root.
#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

/// Rounds up to the nearest integer (not available on `f64` without `std`).
#[inline]
pub fn ceil(x: f64) -> f64 {
    libm::ceil(x)
}

/// Logistic sigmoid. Saturates cleanly: large positive inputs give exactly
/// 1.0, large negative inputs give exactly 0.0.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + exp(-x))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_midpoint_and_saturation() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert_eq!(sigmoid(800.0), 1.0);
        assert_eq!(sigmoid(-800.0), 0.0);
        // symmetry: sigmoid(-x) = 1 - sigmoid(x)
        let x = 1.37;
        assert!((sigmoid(-x) - (1.0 - sigmoid(x))).abs() < 1e-15);
    }

    #[test]
    fn tanh_matches_exp_identity() {
        for &x in &[-2.0, -0.5, 0.0, 0.3, 1.7] {
            let e2 = exp(2.0 * x);
            let want = (e2 - 1.0) / (e2 + 1.0);
            assert!((tanh(x) - want).abs() < 1e-12);
        }
    }
}
