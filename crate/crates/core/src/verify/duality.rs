use std::fmt;

use super::{fmt_num, Table};
use crate::barrier::DualBarrier;
use crate::{ExtReal, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualityGridSpec {
    pub rho_max: f64,
    pub rho_points: usize,
    pub beta_min: f64,
    pub beta_max: f64,
    pub beta_points: usize,
    /// Resolution of the inner grid over which suprema are taken.
    pub sup_points: usize,
    /// Allowed excess in the inequality checks.
    pub slack: f64,
}

impl Default for DualityGridSpec {
    fn default() -> Self {
        DualityGridSpec {
            rho_max: 13.5,
            rho_points: 541,
            beta_min: 0.01,
            beta_max: 20.0,
            beta_points: 400,
            sup_points: 20_000,
            slack: 1e-10,
        }
    }
}

/// One identity or inequality checked on a grid. `violation` is the largest
/// observed error, `bound` the error the grid resolution can explain.
#[derive(Debug, Clone, PartialEq)]
pub struct DualityCheck {
    pub name: String,
    pub level: Option<f64>,
    pub violation: f64,
    pub bound: f64,
    pub samples: usize,
}

impl DualityCheck {
    pub fn passed(&self) -> bool {
        self.violation <= self.bound
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualityReport {
    pub checks: Vec<DualityCheck>,
}

impl DualityReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(DualityCheck::passed)
    }

    pub fn find(&self, name: &str, level: Option<f64>) -> Option<&DualityCheck> {
        self.checks.iter().find(|c| c.name == name && c.level == level)
    }

    pub fn table(&self) -> Table {
        let mut t = Table::new(&["check", "M", "violation", "bound", "samples", "passed"]);
        for c in &self.checks {
            t.rows.push(vec![
                c.name.clone(),
                c.level.map(fmt_num).unwrap_or_default(),
                fmt_num(c.violation),
                fmt_num(c.bound),
                c.samples.to_string(),
                c.passed().to_string(),
            ]);
        }
        t
    }
}

impl fmt::Display for DualityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<34} {:>8} {:>12} {:>12}  result", "check", "M", "violation", "bound")?;
        for c in &self.checks {
            let level = c.level.map(|m| format!("{m}")).unwrap_or_default();
            writeln!(
                f,
                "{:<34} {:>8} {:>12.3e} {:>12.3e}  {}",
                c.name,
                level,
                c.violation,
                c.bound,
                if c.passed() { "ok" } else { "FAIL" }
            )?;
        }
        Ok(())
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![lo];
    }
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
}

/// Running maximum of per-sample errors and bounds.
struct Tally {
    violation: f64,
    bound: f64,
    samples: usize,
}

impl Tally {
    fn new() -> Self {
        Tally {
            violation: 0.0,
            bound: 0.0,
            samples: 0,
        }
    }

    /// Records an error against its own resolution bound; the reported bound
    /// is the one of the worst relative sample.
    fn add(&mut self, err: f64, bound: f64) {
        self.samples += 1;
        let err = if err.is_nan() { f64::INFINITY } else { err };
        if self.samples == 1 || err - bound > self.violation - self.bound {
            self.violation = err;
            self.bound = bound;
        }
    }

    fn finish(self, name: &str, level: Option<f64>) -> DualityCheck {
        DualityCheck {
            name: name.to_string(),
            level,
            violation: self.violation,
            bound: self.bound,
            samples: self.samples,
        }
    }
}

/// Supremum of `f` over the grid points, with the index of the maximizer.
fn grid_sup(values: impl Iterator<Item = f64>) -> (usize, f64) {
    values
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (k, v)| if v > acc.1 { (k, v) } else { acc })
}

/// Checks the conjugate-pair identities, the truncated sup-of-quadratics
/// representation, the piecewise form of the truncated conjugate and the four
/// barrier inequalities on uniform grids.
///
/// A supremum of a concave function `g` over a grid of spacing `d` misses the
/// true supremum by at most `max|g''| d^2 / 2` near the grid maximizer; that is
/// the bound printed beside each identity.
pub fn duality_audit(dual: &DualBarrier, levels: &[f64], spec: &DualityGridSpec) -> Result<DualityReport> {
    let bs = dual.spec();
    let b2 = bs.b_squared();
    let slope0 = dual.slope0();
    let phi0 = dual.phi0();
    let rhos = linspace(0.0, spec.rho_max, spec.rho_points);
    let betas = linspace(spec.beta_min, spec.beta_max, spec.beta_points);
    let mut checks = Vec::new();

    // a^{-1}(a(beta)) = beta and a(a^{-1}(alpha)) = alpha
    let mut t = Tally::new();
    for &beta in betas.iter().filter(|&&b| b >= slope0) {
        let alpha = dual.a(beta)?;
        t.add((dual.a_inv(alpha)? - beta).abs() / beta.abs().max(1.0), 1e-8);
        t.add((dual.a(dual.a_inv(alpha)?)? - alpha).abs() / alpha.abs().max(1.0), 1e-8);
    }
    checks.push(t.finish("conjugate_round_trip", None));

    // Phi(rho) = sup_{beta >= phi'(0)} beta rho - a(beta), over a beta grid;
    // for rho >= b^2 the supremum must run off the end of the grid.
    let q_hi = spec.beta_max.max(slope0 * 2.0);
    let q_grid = linspace(slope0, q_hi, spec.sup_points);
    let q_vals: Vec<f64> = q_grid.iter().map(|&q| dual.a(q)).collect::<Result<_>>()?;
    let dq = q_grid[1] - q_grid[0];
    let mut t = Tally::new();
    let mut unbounded = Tally::new();
    for &rho in &rhos {
        let (k, sup) = grid_sup(q_grid.iter().zip(&q_vals).map(|(q, a)| q * rho - a));
        if rho < b2 {
            // the maximizing slope phi'(rho) lies beyond the grid
            if bs.dphi(rho) > q_hi {
                continue;
            }
            let curv = curvature_near(dual, &q_grid, k)?;
            t.add((bs.phi(rho) - sup).abs(), 0.5 * curv * dq * dq + 1e-12 * sup.abs().max(1.0));
        } else {
            // growth at the grid end means the supremum is +inf
            unbounded.add(if k + 1 == q_grid.len() { 0.0 } else { 1.0 }, 0.0);
        }
    }
    checks.push(t.finish("exact_sup_of_quadratics", None));
    checks.push(unbounded.finish("exact_sup_unbounded_outside", None));

    // a(beta) (and -phi(0) below phi'(0)) = sup_{0 <= rho < b^2} beta rho - phi(rho)
    let r_grid: Vec<f64> = linspace(0.0, b2, spec.sup_points + 1)[..spec.sup_points].to_vec();
    let r_vals: Vec<f64> = r_grid.iter().map(|&r| bs.phi(r)).collect();
    let dr = r_grid[1] - r_grid[0];
    let mut t = Tally::new();
    for &beta in &betas {
        let (k, sup) = grid_sup(r_grid.iter().zip(&r_vals).map(|(r, p)| beta * r - p));
        if k + 1 == r_grid.len() {
            continue;
        }
        let lo = k.saturating_sub(1);
        let curv = (lo..=k + 1).map(|j| bs.d2phi(r_grid[j])).fold(0.0, f64::max);
        t.add((dual.theta(beta) - sup).abs(), 0.5 * curv * dr * dr + 1e-12 * sup.abs().max(1.0));
    }
    checks.push(t.finish("conjugate_from_barrier", None));

    for &m in levels {
        let trunc = dual.truncate(m)?;
        let cap = trunc.beta_cap();

        // Phi^M(rho) = sup_{phi'(0) <= beta <= a^{-1}(M)} beta rho - a(beta)
        let qm = linspace(slope0, cap, spec.sup_points);
        let qm_vals: Vec<f64> = qm.iter().map(|&q| dual.a(q)).collect::<Result<_>>()?;
        let dqm = if qm.len() > 1 { qm[1] - qm[0] } else { 0.0 };
        let mut t = Tally::new();
        for &rho in &rhos {
            let (k, sup) = grid_sup(qm.iter().zip(&qm_vals).map(|(q, a)| q * rho - a));
            let exact = trunc.value_nonneg(rho);
            let curv = if qm.len() > 1 { curvature_near(dual, &qm, k)? } else { 0.0 };
            t.add((exact - sup).abs(), 0.5 * curv * dqm * dqm + 1e-12 * exact.abs().max(1.0));
        }
        checks.push(t.finish("truncated_sup_of_quadratics", Some(m)));

        // sup_rho beta rho - Phi^M(rho) is -phi(0), a(beta) or +inf
        let rm = linspace(0.0, spec.rho_max.max(b2), spec.sup_points);
        let rm_vals: Vec<f64> = rm.iter().map(|&r| trunc.value_nonneg(r)).collect();
        let drm = rm[1] - rm[0];
        let mut t = Tally::new();
        for &beta in &betas {
            let (k, sup) = grid_sup(rm.iter().zip(&rm_vals).map(|(r, p)| beta * r - p));
            match dual.theta_m(m, beta)? {
                ExtReal::PosInf => t.add(if k + 1 == rm.len() { 0.0 } else { 1.0 }, 0.0),
                ExtReal::Finite(v) => {
                    let lo = k.saturating_sub(1);
                    let hi = (k + 1).min(rm.len() - 1);
                    let curv = (lo..=hi)
                        .filter(|&j| rm[j] <= trunc.rho_switch())
                        .map(|j| bs.d2phi(rm[j]))
                        .fold(0.0, f64::max);
                    t.add((v - sup).abs(), 0.5 * curv * drm * drm + 1e-12 * v.abs().max(1.0));
                }
            }
        }
        checks.push(t.finish("truncated_conjugate_ranges", Some(m)));

        let rho_hat = trunc.rho_switch();
        let mut t = Tally::new();
        for &rho in rhos.iter().filter(|&&r| r < b2) {
            t.add(phi0 + slope0 * rho - bs.phi(rho), spec.slack);
        }
        checks.push(t.finish("inequality_tangent_at_origin", Some(m)));

        let mut t = Tally::new();
        for &rho in rhos.iter().filter(|&&r| r >= rho_hat) {
            t.add(phi0 + slope0 * rho - cap * rho + m, spec.slack);
        }
        checks.push(t.finish("inequality_beyond_switch", Some(m)));

        let mut t = Tally::new();
        for &beta in betas.iter().filter(|&&b| b <= slope0) {
            t.add(dual.lambda_plus(m, beta)?, spec.slack);
        }
        t.add(dual.lambda_plus(m, slope0)?, spec.slack);
        checks.push(t.finish("inequality_lambda_below_slope0", Some(m)));

        let mut t = Tally::new();
        for &beta in betas.iter().filter(|&&b| b >= slope0 && b <= cap) {
            t.add(dual.lambda_plus(m, beta)? - dual.a(beta)? - phi0, spec.slack);
        }
        t.add(dual.lambda_plus(m, cap)? - dual.a(cap)? - phi0, spec.slack);
        checks.push(t.finish("inequality_lambda_between", Some(m)));
    }
    Ok(DualityReport { checks })
}

/// Largest `a''` over the cells around grid index `k`.
fn curvature_near(dual: &DualBarrier, grid: &[f64], k: usize) -> Result<f64> {
    let lo = k.saturating_sub(1);
    let hi = (k + 1).min(grid.len() - 1);
    let mut c: f64 = 0.0;
    for &q in &grid[lo..=hi] {
        c = c.max(dual.d2a(q)?);
    }
    Ok(c)
}
