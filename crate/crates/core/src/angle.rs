//! Angle arithmetic on the circle.

use crate::real::Real;

/// Wrap an angle to `(-π, π]`.
pub fn wrap_to_pi<F: Real>(a: F) -> F {
    let tau = F::tau();
    let mut w = a % tau;
    if w > F::PI() {
        w = w - tau;
    } else if w <= -F::PI() {
        w = w + tau;
    }
    w
}

/// Wrap an angle to `[0, 2π)`.
pub fn wrap_to_tau<F: Real>(a: F) -> F {
    let tau = F::tau();
    let mut w = a % tau;
    if w < F::zero() {
        w = w + tau;
    }
    // `-1e-20 % tau` rounds to tau.
    if w >= tau {
        w = w - tau;
    }
    w
}

/// Signed circular difference `a - b`, wrapped to `(-π, π]`.
pub fn circ_diff<F: Real>(a: F, b: F) -> F {
    wrap_to_pi(a - b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrapping() {
        assert!((wrap_to_pi(3.0 * std::f64::consts::PI) - std::f64::consts::PI).abs() < 1e-12);
        assert!((wrap_to_tau(-0.1) - (2.0 * std::f64::consts::PI - 0.1)).abs() < 1e-12);
        assert_eq!(wrap_to_tau(0.0), 0.0);
        assert!((circ_diff(0.1, 2.0 * std::f64::consts::PI - 0.1) - 0.2).abs() < 1e-12);
    }
}
