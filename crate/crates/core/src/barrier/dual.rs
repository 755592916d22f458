use super::lambert::solve_y_minus_ln_y;
use super::spec::{BarrierKind, BarrierSpec};
use crate::{Error, Result};

pub const DEFAULT_INV_TOLERANCE: f64 = 1e-12;

/// The convex conjugate `a` of a barrier's finite part,
/// `a(beta) = beta * (phi')^{-1}(beta) - phi((phi')^{-1}(beta))` on
/// `beta >= phi'(0)`, together with its inverse.
///
/// `a` is strictly increasing from `a(phi'(0)) = -phi(0)`, so `a_inv` maps
/// `[-phi(0), inf)` onto `[phi'(0), inf)`.
#[derive(Debug, Clone)]
pub struct DualBarrier {
    spec: BarrierSpec,
    inv_tolerance: f64,
    slope0: f64,
    phi0: f64,
}

/// Builds the conjugate of `spec` with the default root-solve tolerance.
pub fn conjugate(spec: BarrierSpec) -> DualBarrier {
    DualBarrier::new(spec)
}

impl DualBarrier {
    pub fn new(spec: BarrierSpec) -> Self {
        Self::with_tolerance(spec, DEFAULT_INV_TOLERANCE)
    }

    pub fn with_tolerance(spec: BarrierSpec, inv_tolerance: f64) -> Self {
        let slope0 = spec.dphi(0.0);
        let phi0 = spec.phi(0.0);
        DualBarrier {
            spec,
            inv_tolerance,
            slope0,
            phi0,
        }
    }

    pub fn spec(&self) -> &BarrierSpec {
        &self.spec
    }

    pub fn inv_tolerance(&self) -> f64 {
        self.inv_tolerance
    }

    /// `phi(0)`.
    pub fn phi0(&self) -> f64 {
        self.phi0
    }

    /// `phi'(0)`, the left end of the domain of `a`.
    pub fn slope0(&self) -> f64 {
        self.slope0
    }

    /// `-phi(0)`, the smallest admissible penalty level.
    pub fn alpha_min(&self) -> f64 {
        -self.phi0
    }

    fn check_beta(&self, beta: f64) -> Result<()> {
        if beta >= self.slope0 {
            Ok(())
        } else {
            Err(Error::domain(format!(
                "conjugate needs beta >= phi'(0) = {}, got {beta}",
                self.slope0
            )))
        }
    }

    pub fn a(&self, beta: f64) -> Result<f64> {
        self.check_beta(beta)?;
        Ok(self.a_unchecked(beta))
    }

    fn a_unchecked(&self, beta: f64) -> f64 {
        match self.spec.kind() {
            BarrierKind::LogBarrier => {
                // x - ln x - 1 with x = b^2 beta, written to avoid cancellation near x = 1
                let xm1 = self.spec.b_squared() * beta - 1.0;
                xm1 - xm1.ln_1p()
            }
            BarrierKind::Custom => {
                if beta == self.slope0 {
                    return -self.phi0;
                }
                let rho = self.spec.dphi_inv(beta).unwrap_or(0.0);
                beta * rho - self.spec.phi(rho)
            }
        }
    }

    /// `a'(beta) = (phi')^{-1}(beta)`.
    pub fn da(&self, beta: f64) -> Result<f64> {
        self.check_beta(beta)?;
        self.spec.dphi_inv(beta)
    }

    /// `a''(beta) = 1 / phi''((phi')^{-1}(beta))`.
    pub fn d2a(&self, beta: f64) -> Result<f64> {
        self.check_beta(beta)?;
        match self.spec.kind() {
            BarrierKind::LogBarrier => Ok(1.0 / (beta * beta)),
            BarrierKind::Custom => Ok(1.0 / self.spec.d2phi(self.spec.dphi_inv(beta)?)),
        }
    }

    /// `a^{-1}(alpha)` by Newton's method on `a(beta) = alpha`, safeguarded by
    /// bisection on a doubling bracket.
    pub fn a_inv(&self, alpha: f64) -> Result<f64> {
        let amin = self.alpha_min();
        if !(alpha >= amin) || !alpha.is_finite() {
            return Err(Error::domain(format!("a^-1 needs alpha >= {amin}, got {alpha}")));
        }
        let lo0 = self.slope0;
        if alpha == amin {
            return Ok(lo0);
        }

        let mut lo = lo0;
        let mut step = lo0.abs().max(1.0);
        let mut hi = lo0 + step;
        while self.a_unchecked(hi) < alpha {
            lo = hi;
            step *= 2.0;
            hi = lo0 + step;
        }

        let mut beta = 0.5 * (lo + hi);
        for _ in 0..200 {
            let g = self.a_unchecked(beta) - alpha;
            if g == 0.0 {
                return Ok(beta);
            }
            if g > 0.0 {
                hi = beta;
            } else {
                lo = beta;
            }
            let slope = self.da(beta).unwrap_or(0.0);
            let newton = beta - g / slope;
            let next = if slope > 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            let scale = 4.0 * f64::EPSILON * next.abs().max(1.0);
            if (next - beta).abs() <= scale || hi - lo <= scale {
                beta = next;
                break;
            }
            beta = next;
        }

        let residual = (self.a_unchecked(beta) - alpha).abs();
        if residual > self.inv_tolerance * alpha.abs().max(1.0) {
            return Err(Error::domain(format!(
                "a^-1({alpha}) did not converge, residual {residual:e}"
            )));
        }
        Ok(beta)
    }

    /// Closed-form `a^{-1}` for the log barrier via `W_{-1}`:
    /// `a^{-1}(alpha) = -W_{-1}(-exp(-1 - alpha)) / b^2`.
    pub fn a_inv_lambert(&self, alpha: f64) -> Result<f64> {
        if self.spec.kind() != BarrierKind::LogBarrier {
            return Err(Error::param("the Lambert-W inverse exists only for the log barrier"));
        }
        if !(alpha >= self.alpha_min()) || !alpha.is_finite() {
            return Err(Error::domain(format!("a^-1 needs alpha >= 0, got {alpha}")));
        }
        Ok(solve_y_minus_ln_y(1.0 + alpha) / self.spec.b_squared())
    }

    /// Switch radius `(phi')^{-1}(a^{-1}(M))` where the truncated barrier
    /// leaves `phi` and becomes linear.
    pub fn rho_hat(&self, m: f64) -> Result<f64> {
        let beta = self.a_inv(m)?;
        self.spec.dphi_inv(beta)
    }

    /// The full conjugate of the extended barrier: `-phi(0)` below `phi'(0)`,
    /// `a(beta)` above.
    pub fn theta(&self, beta: f64) -> f64 {
        if beta < self.slope0 {
            -self.phi0
        } else {
            self.a_unchecked(beta)
        }
    }
}
