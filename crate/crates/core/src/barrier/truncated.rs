use super::dual::DualBarrier;
use crate::{Error, ExtReal, Result};

/// The barrier truncated at penalty level `M`: the supremum of quadratics
/// `a^{-1}(alpha) rho - alpha` restricted to `alpha in [-phi(0), M]`.
///
/// Equal to `phi` on `[0, rho_hat(M)]` and to the tangent line
/// `a^{-1}(M) rho - M` beyond it. Caches `a^{-1}(M)` and `rho_hat(M)` so it can
/// be evaluated inside integrators without root solves.
#[derive(Debug, Clone)]
pub struct Truncation {
    dual: DualBarrier,
    level: f64,
    beta_cap: f64,
    rho_switch: f64,
}

impl Truncation {
    pub fn dual(&self) -> &DualBarrier {
        &self.dual
    }

    pub fn level(&self) -> f64 {
        self.level
    }

    /// `a^{-1}(M)`.
    pub fn beta_cap(&self) -> f64 {
        self.beta_cap
    }

    /// `rho_hat(M)`.
    pub fn rho_switch(&self) -> f64 {
        self.rho_switch
    }

    pub fn value(&self, rho: f64) -> ExtReal {
        if rho < 0.0 {
            ExtReal::PosInf
        } else if rho <= self.rho_switch {
            ExtReal::Finite(self.dual.spec().phi(rho))
        } else {
            ExtReal::Finite(self.beta_cap * rho - self.level)
        }
    }

    /// Value for `rho >= 0`, where the truncation is always finite.
    pub fn value_nonneg(&self, rho: f64) -> f64 {
        debug_assert!(rho >= 0.0);
        if rho <= self.rho_switch {
            self.dual.spec().phi(rho)
        } else {
            self.beta_cap * rho - self.level
        }
    }

    /// The maximizing penalty level `a(phi'(rho))`, clipped at `M`.
    pub fn alpha_star(&self, rho: f64) -> f64 {
        if rho <= self.rho_switch {
            self.dual.a(self.dual.spec().dphi(rho.max(0.0))).unwrap_or(self.level).min(self.level)
        } else {
            self.level
        }
    }

    /// `a^{-1}(alpha_star(rho))`, the quadratic weight selected at `rho`. This is
    /// the slope of the truncated barrier, `min(phi'(rho), a^{-1}(M))`.
    pub fn weight(&self, rho: f64) -> f64 {
        if rho <= self.rho_switch {
            self.dual.spec().dphi(rho.max(0.0)).min(self.beta_cap)
        } else {
            self.beta_cap
        }
    }
}

impl DualBarrier {
    pub fn truncate(&self, m: f64) -> Result<Truncation> {
        let amin = self.alpha_min();
        if !(m >= amin) || !m.is_finite() {
            return Err(Error::param(format!("truncation level must be >= {amin}, got {m}")));
        }
        let beta_cap = self.a_inv(m)?;
        let rho_switch = self.spec().dphi_inv(beta_cap)?;
        Ok(Truncation {
            dual: self.clone(),
            level: m,
            beta_cap,
            rho_switch,
        })
    }

    /// The extended barrier: `phi(rho)` on `[0, b^2)`, `+inf` elsewhere.
    pub fn barrier_value(&self, rho: f64) -> ExtReal {
        if rho >= 0.0 && rho < self.spec().b_squared() {
            ExtReal::Finite(self.spec().phi(rho))
        } else {
            ExtReal::PosInf
        }
    }

    /// The truncated barrier at level `m`.
    pub fn barrier_value_m(&self, m: f64, rho: f64) -> Result<ExtReal> {
        Ok(self.truncate(m)?.value(rho))
    }

    /// Maximizer of `a^{-1}(alpha) rho - alpha` over `alpha in [-phi(0), m]`.
    pub fn maximizer_alpha_m(&self, m: f64, rho: f64) -> Result<f64> {
        if !(rho >= 0.0) {
            return Err(Error::param(format!("rho must be nonnegative, got {rho}")));
        }
        Ok(self.truncate(m)?.alpha_star(rho))
    }

    /// Maximizer over all `alpha >= -phi(0)`; `+inf` once `rho >= b^2`.
    pub fn maximizer_alpha_exact(&self, rho: f64) -> ExtReal {
        if rho < self.spec().b_squared() {
            let rho = rho.max(0.0);
            ExtReal::Finite(self.a(self.spec().dphi(rho)).unwrap_or(self.alpha_min()))
        } else {
            ExtReal::PosInf
        }
    }

    /// `gamma_rho(alpha) = a^{-1}(alpha) rho - alpha`.
    pub fn gamma(&self, rho: f64, alpha: f64) -> Result<f64> {
        Ok(self.a_inv(alpha)? * rho - alpha)
    }

    /// First and second derivatives of `gamma_rho` in `alpha`. Undefined at
    /// `alpha = -phi(0)` where `rho_hat` vanishes.
    pub fn gamma_derivatives(&self, rho: f64, alpha: f64) -> Result<(f64, f64)> {
        if !(alpha > self.alpha_min()) {
            return Err(Error::domain(format!(
                "gamma derivatives need alpha > {}, got {alpha}",
                self.alpha_min()
            )));
        }
        let rh = self.rho_hat(alpha)?;
        let d1 = rho / rh - 1.0;
        let d2 = -rho / (self.spec().d2phi(rh) * rh * rh * rh);
        Ok((d1, d2))
    }

    /// `lambda_+^M(beta) = M + phi(0) - (a^{-1}(M) - beta) rho_hat(M)`.
    pub fn lambda_plus(&self, m: f64, beta: f64) -> Result<f64> {
        let t = self.truncate(m)?;
        Ok(m + self.phi0() - (t.beta_cap - beta) * t.rho_switch)
    }

    /// The conjugate of the truncated barrier: `-phi(0)` below `phi'(0)`,
    /// `a(beta)` up to `a^{-1}(m)`, `+inf` beyond.
    pub fn theta_m(&self, m: f64, beta: f64) -> Result<ExtReal> {
        let t = self.truncate(m)?;
        Ok(if beta > t.beta_cap {
            ExtReal::PosInf
        } else {
            ExtReal::Finite(self.theta(beta))
        })
    }
}
