//! The `-1` branch of the Lambert W function, evaluated in log space.
//!
//! `w = W_{-1}(x)` for `x in [-1/e, 0)` is written as `w = -y` with
//! `y - ln y = -ln(-x)`, `y >= 1`. Working with `s = -ln(-x)` directly keeps
//! arguments like `-exp(-1 - alpha)` representable for large `alpha`.

use crate::{Error, Result};

/// Solves `y - ln y = s` for the root `y >= 1`. Requires `s >= 1`.
pub(crate) fn solve_y_minus_ln_y(s: f64) -> f64 {
    debug_assert!(s >= 1.0);
    let excess = s - 1.0;
    if excess <= 0.0 {
        return 1.0;
    }
    // Branch-point series for small excess, log asymptotics otherwise.
    let mut y = if excess < 2.0 {
        let q = (2.0 * excess).sqrt();
        1.0 + q + q * q / 3.0 + q * q * q / 36.0
    } else {
        let l = s.ln();
        s + l + l / s
    };
    for _ in 0..50 {
        let f = y - y.ln() - s;
        let df = 1.0 - 1.0 / y;
        let d2f = 1.0 / (y * y);
        let denom = 2.0 * df * df - f * d2f;
        let step = if denom != 0.0 { 2.0 * f * df / denom } else { f / df };
        let next = (y - step).max(1.0);
        if (next - y).abs() <= 2.0 * f64::EPSILON * next {
            return next;
        }
        y = next;
    }
    y
}

/// `W_{-1}(x)` for `x in [-1/e, 0)`.
pub fn lambert_w_m1(x: f64) -> Result<f64> {
    let branch_point = -(-1.0f64).exp();
    if !(x < 0.0 && x >= branch_point - 4.0 * f64::EPSILON) {
        return Err(Error::domain(format!("W_-1 is defined on [-1/e, 0), got {x}")));
    }
    let s = (-(-x).ln()).max(1.0);
    Ok(-solve_y_minus_ln_y(s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    // Reference values from an independent arbitrary-precision evaluation.
    #[test]
    fn matches_reference_values() {
        let cases = [
            (-0.1, -3.5771520639572972),
            (-1e-10, -26.295238819246926),
            (-0.3, -1.7813370234216275),
            (-0.36787944, -1.0000798057616638),
        ];
        for (x, w) in cases {
            assert_relative_eq!(lambert_w_m1(x).unwrap(), w, max_relative = 1e-9);
        }
    }

    #[test]
    fn branch_point_and_defining_identity() {
        let e_inv = (-1.0f64).exp();
        assert_relative_eq!(lambert_w_m1(-e_inv).unwrap(), -1.0, max_relative = 1e-7);
        for k in 1..200 {
            let x = -e_inv * (k as f64 / 200.0);
            let w = lambert_w_m1(x).unwrap();
            assert!(w <= -1.0);
            assert_relative_eq!(w * w.exp(), x, max_relative = 1e-12);
        }
    }

    #[test]
    fn rejects_outside_domain() {
        assert!(lambert_w_m1(0.0).is_err());
        assert!(lambert_w_m1(-0.5).is_err());
        assert!(lambert_w_m1(0.1).is_err());
    }
}
