use std::fmt;
use std::sync::Arc;

use crate::{Error, Result};

/// A scalar function of `rho`, shareable across threads.
pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BarrierKind {
    /// `phi(rho) = -log(1 - rho / b^2)`.
    LogBarrier,
    Custom,
}

/// The finite part `phi` of a barrier on `[0, b^2)`, with its first two
/// derivatives.
#[derive(Clone)]
pub struct BarrierSpec {
    b: f64,
    kind: BarrierKind,
    phi: ScalarFn,
    dphi: ScalarFn,
    d2phi: ScalarFn,
}

impl fmt::Debug for BarrierSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BarrierSpec")
            .field("b", &self.b)
            .field("kind", &self.kind)
            .finish_non_exhaustive()
    }
}

/// Log barrier `phi(rho) = -log(1 - rho / b^2)` with its closed-form derivatives.
pub fn make_log_barrier(b: f64) -> Result<BarrierSpec> {
    BarrierSpec::log(b)
}

impl BarrierSpec {
    pub fn log(b: f64) -> Result<Self> {
        if !(b.is_finite() && b > 0.0) {
            return Err(Error::param(format!("barrier radius must be positive, got {b}")));
        }
        let b2 = b * b;
        Ok(BarrierSpec {
            b,
            kind: BarrierKind::LogBarrier,
            phi: Arc::new(move |rho| -(-rho / b2).ln_1p()),
            dphi: Arc::new(move |rho| 1.0 / (b2 - rho)),
            d2phi: Arc::new(move |rho| {
                let gap = b2 - rho;
                1.0 / (gap * gap)
            }),
        })
    }

    /// A caller-supplied barrier. The convexity and blow-up requirements are
    /// checked on a probe grid and violators are rejected.
    pub fn custom(b: f64, phi: ScalarFn, dphi: ScalarFn, d2phi: ScalarFn) -> Result<Self> {
        if !(b.is_finite() && b > 0.0) {
            return Err(Error::param(format!("barrier radius must be positive, got {b}")));
        }
        let spec = BarrierSpec {
            b,
            kind: BarrierKind::Custom,
            phi,
            dphi,
            d2phi,
        };
        spec.check_probe_grid()?;
        Ok(spec)
    }

    fn check_probe_grid(&self) -> Result<()> {
        let b2 = self.b_squared();
        let probes = 512;
        let mut prev_slope = f64::NEG_INFINITY;
        for i in 0..probes {
            let rho = b2 * i as f64 / probes as f64;
            let (p, dp, d2p) = (self.phi(rho), self.dphi(rho), self.d2phi(rho));
            if !(p.is_finite() && dp.is_finite() && d2p.is_finite()) {
                return Err(Error::param(format!("phi is not finite at rho = {rho}")));
            }
            if d2p <= 0.0 {
                return Err(Error::param(format!("phi'' must be positive, got {d2p} at rho = {rho}")));
            }
            if dp <= prev_slope {
                return Err(Error::param(format!("phi' is not increasing at rho = {rho}")));
            }
            prev_slope = dp;
        }

        // Blow-up at b^2: along rho = b^2 (1 - 10^-k) the value must keep
        // increasing, and the per-decade increments must not die out the way
        // they do for a function that stays bounded.
        let values: Vec<f64> = (1..=12)
            .map(|k| self.phi(b2 * (1.0 - 10f64.powi(-k))))
            .collect();
        let increments: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
        if values.iter().any(|v| !v.is_finite()) || increments.iter().any(|&d| d <= 0.0) {
            return Err(Error::param("phi must increase towards the boundary b^2"));
        }
        if increments[increments.len() - 1] < 1e-3 * increments[0] {
            return Err(Error::param("phi appears bounded near b^2; a barrier must blow up"));
        }
        Ok(())
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn b_squared(&self) -> f64 {
        self.b * self.b
    }

    pub fn kind(&self) -> BarrierKind {
        self.kind
    }

    pub fn phi(&self, rho: f64) -> f64 {
        (self.phi)(rho)
    }

    pub fn dphi(&self, rho: f64) -> f64 {
        (self.dphi)(rho)
    }

    pub fn d2phi(&self, rho: f64) -> f64 {
        (self.d2phi)(rho)
    }

    /// `(phi')^{-1}(beta)`, mapping `[phi'(0), inf)` onto `[0, b^2)`.
    pub fn dphi_inv(&self, beta: f64) -> Result<f64> {
        let slope0 = self.dphi(0.0);
        if !(beta >= slope0) {
            return Err(Error::domain(format!("(phi')^-1 needs beta >= {slope0}, got {beta}")));
        }
        if beta == slope0 {
            return Ok(0.0);
        }
        match self.kind {
            BarrierKind::LogBarrier => Ok((self.b_squared() - 1.0 / beta).max(0.0)),
            BarrierKind::Custom => Ok(self.dphi_inv_numeric(beta)),
        }
    }

    fn dphi_inv_numeric(&self, beta: f64) -> f64 {
        let b2 = self.b_squared();
        let mut lo = 0.0;
        let mut hi = b2 * 0.5;
        let mut k = 1;
        while self.dphi(hi) < beta && k < 60 {
            lo = hi;
            k += 1;
            hi = b2 * (1.0 - 0.5f64.powi(k));
        }
        let mut rho = 0.5 * (lo + hi);
        for _ in 0..200 {
            let g = self.dphi(rho) - beta;
            if g == 0.0 {
                return rho;
            }
            if g > 0.0 {
                hi = rho;
            } else {
                lo = rho;
            }
            let newton = rho - g / self.d2phi(rho);
            let next = if newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if (next - rho).abs() <= 4.0 * f64::EPSILON * b2 || hi - lo <= 4.0 * f64::EPSILON * b2 {
                return next;
            }
            rho = next;
        }
        rho
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn log_barrier_closed_forms_at_origin() {
        let spec = make_log_barrier(3.0).unwrap();
        assert_eq!(spec.phi(0.0), 0.0);
        assert_abs_diff_eq!(spec.dphi(0.0), 1.0 / 9.0, epsilon = 1e-16);
        assert_abs_diff_eq!(spec.d2phi(0.0), 1.0 / 81.0, epsilon = 1e-16);
    }

    #[test]
    fn log_barrier_direct_evaluation() {
        let spec = make_log_barrier(1.0).unwrap();
        assert_abs_diff_eq!(spec.phi(0.5), std::f64::consts::LN_2, epsilon = 1e-15);
    }

    #[test]
    fn log_barrier_blows_up_at_boundary() {
        let spec = make_log_barrier(3.0).unwrap();
        let vals: Vec<f64> = (1..14).map(|k| spec.phi(9.0 * (1.0 - 10f64.powi(-k)))).collect();
        assert!(vals.windows(2).all(|w| w[1] > w[0]));
        assert!(vals[vals.len() - 1] > 29.0);
    }

    #[test]
    fn rejects_non_positive_radius() {
        assert!(matches!(make_log_barrier(0.0), Err(Error::InvalidParameter(_))));
        assert!(matches!(make_log_barrier(-1.0), Err(Error::InvalidParameter(_))));
        assert!(make_log_barrier(f64::NAN).is_err());
    }

    #[test]
    fn custom_barrier_is_validated() {
        // phi = 1/(b^2 - rho), a valid barrier with phi(0) != 0.
        let b2 = 4.0;
        let ok = BarrierSpec::custom(
            2.0,
            Arc::new(move |r| 1.0 / (b2 - r)),
            Arc::new(move |r| 1.0 / ((b2 - r) * (b2 - r))),
            Arc::new(move |r| 2.0 / ((b2 - r) * (b2 - r) * (b2 - r))),
        );
        assert!(ok.is_ok());

        // rho^2 is convex but bounded on [0, b^2).
        let bounded = BarrierSpec::custom(
            2.0,
            Arc::new(|r| r * r),
            Arc::new(|r| 2.0 * r),
            Arc::new(|_| 2.0),
        );
        assert!(bounded.is_err());

        let bounded_root = BarrierSpec::custom(
            2.0,
            Arc::new(move |r| -(b2 - r).sqrt()),
            Arc::new(move |r| 0.5 / (b2 - r).sqrt()),
            Arc::new(move |r| 0.25 / (b2 - r).powf(1.5)),
        );
        assert!(bounded_root.is_err());

        let not_convex = BarrierSpec::custom(
            2.0,
            Arc::new(move |r| -(1.0 - r / b2).ln() - r * r),
            Arc::new(move |r| 1.0 / (b2 - r) - 2.0 * r),
            Arc::new(move |r| 1.0 / ((b2 - r) * (b2 - r)) - 2.0),
        );
        assert!(not_convex.is_err());
    }

    #[test]
    fn numeric_slope_inverse_matches_closed_form() {
        let b2 = 9.0;
        let custom = BarrierSpec::custom(
            3.0,
            Arc::new(move |r| -(-r / b2).ln_1p()),
            Arc::new(move |r| 1.0 / (b2 - r)),
            Arc::new(move |r| 1.0 / ((b2 - r) * (b2 - r))),
        )
        .unwrap();
        let log = make_log_barrier(3.0).unwrap();
        for &beta in &[1.0 / 9.0 + 1e-9, 0.2, 1.0, 10.0, 1e4] {
            let expected = log.dphi_inv(beta).unwrap();
            assert_abs_diff_eq!(custom.dphi_inv(beta).unwrap(), expected, epsilon = 1e-11);
        }
        assert!(custom.dphi_inv(0.1).is_err());
    }
}
