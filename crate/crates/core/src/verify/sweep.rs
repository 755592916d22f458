use std::fmt;

use nalgebra::DVector;

use super::{fmt_num, Table};
use crate::lti::{violation_measure, Grid, Problem};
use crate::shooting::{solve_tpbvp, ShootingConfig};
use crate::{Error, Result};

/// Values, violation measures and the rate `beta(M)` across truncation levels.
#[derive(Debug, Clone, PartialEq)]
pub struct MSweepReport {
    pub m_values: Vec<f64>,
    pub values: Vec<f64>,
    pub violation_measures: Vec<f64>,
    pub beta_values: Vec<f64>,
    pub residuals: Vec<f64>,
    pub max_alpha: Vec<f64>,
    pub converged: Vec<bool>,
    /// The constant `c` in `beta(M) = 2 / (Phi^M(b^2) - c)`.
    pub offset: f64,
    /// Width of one grid cell, the resolution of the violation measure.
    pub cell: f64,
}

/// The default `c = phi(0) - 1`, strictly below the infimum `phi(0)` of
/// every truncated barrier.
pub fn sweep_offset(problem: &Problem) -> f64 {
    problem.dual().phi0() - 1.0
}

/// Solves the constrained problem for each level in `m_list`.
pub fn m_sweep(
    problem: &Problem,
    x: &DVector<f64>,
    m_list: &[f64],
    config: &ShootingConfig,
    grid: &Grid,
    offset: Option<f64>,
) -> Result<MSweepReport> {
    if m_list.is_empty() {
        return Err(Error::param("empty level list"));
    }
    if m_list.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::param("levels must be strictly increasing"));
    }
    let c = offset.unwrap_or_else(|| sweep_offset(problem));
    if !(c < problem.dual().phi0()) {
        return Err(Error::param(format!("offset {c} must lie below phi(0) = {}", problem.dual().phi0())));
    }
    let b2 = problem.dual().spec().b_squared();
    let mut report = MSweepReport {
        m_values: m_list.to_vec(),
        values: Vec::new(),
        violation_measures: Vec::new(),
        beta_values: Vec::new(),
        residuals: Vec::new(),
        max_alpha: Vec::new(),
        converged: Vec::new(),
        offset: c,
        cell: grid.step(),
    };
    for &m in m_list {
        let p = problem.with_level(m)?;
        let res = solve_tpbvp(&p, x, config, grid)?;
        let phi_m_edge = p.truncation().beta_cap() * b2 - m;
        report.values.push(res.value);
        report.violation_measures.push(violation_measure(&p, &res.trajectory));
        report.beta_values.push(2.0 / (phi_m_edge - c));
        report.residuals.push(res.residual);
        report.max_alpha.push(res.alpha.max());
        report.converged.push(res.converged);
    }
    Ok(report)
}

impl MSweepReport {
    pub fn all_converged(&self) -> bool {
        self.converged.iter().all(|&c| c)
    }

    pub fn values_nondecreasing(&self, slack: f64) -> bool {
        self.values.windows(2).all(|w| w[1] >= w[0] - slack)
    }

    /// Violation measures nonincreasing up to `cells` grid cells.
    pub fn measures_nonincreasing(&self, cells: f64) -> bool {
        self.violation_measures.windows(2).all(|w| w[1] <= w[0] + cells * self.cell)
    }

    pub fn beta_strictly_decreasing(&self) -> bool {
        self.beta_values.windows(2).all(|w| w[1] < w[0])
    }

    pub fn table(&self) -> Table {
        let mut t = Table::new(&["M", "value", "violation_measure", "beta", "residual", "max_alpha", "converged"]);
        for k in 0..self.m_values.len() {
            t.rows.push(vec![
                fmt_num(self.m_values[k]),
                fmt_num(self.values[k]),
                fmt_num(self.violation_measures[k]),
                fmt_num(self.beta_values[k]),
                fmt_num(self.residuals[k]),
                fmt_num(self.max_alpha[k]),
                self.converged[k].to_string(),
            ]);
        }
        t
    }
}

impl fmt::Display for MSweepReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "truncation sweep (c = {})", self.offset)?;
        writeln!(f, "{:>10} {:>14} {:>12} {:>12} {:>10} {:>9}", "M", "value", "measure", "beta", "residual", "max alpha")?;
        for k in 0..self.m_values.len() {
            writeln!(
                f,
                "{:>10.3} {:>14.8} {:>12.6} {:>12.8} {:>10.2e} {:>9.4}{}",
                self.m_values[k],
                self.values[k],
                self.violation_measures[k],
                self.beta_values[k],
                self.residuals[k],
                self.max_alpha[k],
                if self.converged[k] { "" } else { "  (not converged)" }
            )?;
        }
        Ok(())
    }
}
