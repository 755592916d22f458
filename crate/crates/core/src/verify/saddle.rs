use std::f64::consts::PI;
use std::fmt;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{fmt_num, Table};
use crate::lti::{game_cost, ControlSignal, Grid, Problem, Schedule};
use crate::shooting::ShootingResult;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaddleSpec {
    pub trials: usize,
    pub seed: u64,
    /// Amplitude of smooth schedule perturbations, as a fraction of `M + phi(0)`.
    pub alpha_scale: f64,
    /// Amplitude of smooth control perturbations.
    pub control_scale: f64,
}

impl Default for SaddleSpec {
    fn default() -> Self {
        SaddleSpec {
            trials: 100,
            seed: 0x5eed,
            alpha_scale: 0.2,
            control_scale: 0.5,
        }
    }
}

/// Worst margins of the two saddle inequalities. Both are nonnegative at an
/// exact saddle point:
/// `alpha_margins[i] = J(u*, alpha*) - J(u*, alpha_i)` and
/// `control_margins[i] = J(u_i, alpha*) - J(u*, alpha*)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SaddleReport {
    pub seed: u64,
    pub base_value: f64,
    pub alpha_margins: Vec<f64>,
    pub control_margins: Vec<f64>,
}

impl SaddleReport {
    pub fn worst_alpha_margin(&self) -> f64 {
        self.alpha_margins.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn worst_control_margin(&self) -> f64 {
        self.control_margins.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn table(&self) -> Table {
        let mut t = Table::new(&["trial", "alpha_margin", "control_margin"]);
        for (k, (a, c)) in self.alpha_margins.iter().zip(&self.control_margins).enumerate() {
            t.rows.push(vec![k.to_string(), fmt_num(*a), fmt_num(*c)]);
        }
        t
    }
}

impl fmt::Display for SaddleReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "saddle audit (seed {}, {} trials per player)", self.seed, self.alpha_margins.len())?;
        writeln!(f, "  J(u*, alpha*)              = {:.10}", self.base_value)?;
        writeln!(f, "  worst penalty-player margin = {:.3e}", self.worst_alpha_margin())?;
        writeln!(f, "  worst control-player margin = {:.3e}", self.worst_control_margin())
    }
}

/// `sum_j c_j sin(j pi s / t + phase_j)` with random coefficients in `[-1, 1]`.
fn smooth_profile(rng: &mut ChaCha8Rng, grid: &Grid) -> Vec<f64> {
    const MODES: usize = 4;
    let coef: Vec<(f64, f64)> = (0..MODES)
        .map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(0.0..2.0 * PI)))
        .collect();
    let t = grid.horizon();
    grid.times()
        .map(|s| {
            coef.iter()
                .enumerate()
                .map(|(j, (c, ph))| c * ((j + 1) as f64 * PI * s / t + ph).sin())
                .sum::<f64>()
                / MODES as f64
        })
        .collect()
}

/// Perturbs each player separately around a converged shooting result.
///
/// Even penalty trials add a smooth clamped perturbation to `alpha*`, odd ones
/// draw every node uniformly from `[-phi(0), M]`. Control trials add a smooth
/// perturbation to every input channel.
pub fn saddle_audit(problem: &Problem, x: &DVector<f64>, result: &ShootingResult, spec: &SaddleSpec) -> Result<SaddleReport> {
    let grid = result.trajectory.grid;
    let base = game_cost(problem, x, &result.control, &result.alpha, &grid)?;
    let (lo, hi) = (problem.dual().alpha_min(), problem.level());
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut alpha_margins = Vec::with_capacity(spec.trials);
    for trial in 0..spec.trials {
        let values = if trial % 2 == 0 {
            let w = smooth_profile(&mut rng, &grid);
            result
                .alpha
                .values
                .iter()
                .zip(&w)
                .map(|(a, d)| (a + spec.alpha_scale * (hi - lo) * d).clamp(lo, hi))
                .collect()
        } else {
            (0..grid.nodes()).map(|_| rng.gen_range(lo..=hi)).collect()
        };
        let j = game_cost(problem, x, &result.control, &Schedule { values }, &grid)?;
        alpha_margins.push(base - j);
    }

    let m = problem.plant().input_dim();
    let mut control_margins = Vec::with_capacity(spec.trials);
    for _ in 0..spec.trials {
        let channels: Vec<Vec<f64>> = (0..m).map(|_| smooth_profile(&mut rng, &grid)).collect();
        let u = ControlSignal {
            samples: result
                .control
                .samples
                .iter()
                .enumerate()
                .map(|(k, u)| u + DVector::from_iterator(m, channels.iter().map(|c| spec.control_scale * c[k])))
                .collect(),
        };
        let j = game_cost(problem, x, &u, &result.alpha, &grid)?;
        control_margins.push(j - base);
    }

    Ok(SaddleReport {
        seed: spec.seed,
        base_value: base,
        alpha_margins,
        control_margins,
    })
}

/// Worst smooth-perturbation margins for each amplitude in `scales`, using
/// the same random directions at every amplitude.
pub fn saddle_scaling(
    problem: &Problem,
    x: &DVector<f64>,
    result: &ShootingResult,
    scales: &[f64],
    trials: usize,
    seed: u64,
) -> Result<Vec<(f64, f64, f64)>> {
    let grid = result.trajectory.grid;
    let base = game_cost(problem, x, &result.control, &result.alpha, &grid)?;
    let (lo, hi) = (problem.dual().alpha_min(), problem.level());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = problem.plant().input_dim();
    let directions: Vec<(Vec<f64>, Vec<Vec<f64>>)> = (0..trials)
        .map(|_| {
            let a = smooth_profile(&mut rng, &grid);
            let u = (0..m).map(|_| smooth_profile(&mut rng, &grid)).collect();
            (a, u)
        })
        .collect();
    let mut out = Vec::with_capacity(scales.len());
    for &scale in scales {
        let (mut worst_a, mut worst_u) = (f64::INFINITY, f64::INFINITY);
        for (da, du) in &directions {
            let values = result
                .alpha
                .values
                .iter()
                .zip(da)
                .map(|(a, d)| (a + scale * (hi - lo) * d).clamp(lo, hi))
                .collect();
            let ja = game_cost(problem, x, &result.control, &Schedule { values }, &grid)?;
            let u = ControlSignal {
                samples: result
                    .control
                    .samples
                    .iter()
                    .enumerate()
                    .map(|(k, u)| u + DVector::from_iterator(m, du.iter().map(|c| scale * c[k])))
                    .collect(),
            };
            let ju = game_cost(problem, x, &u, &result.alpha, &grid)?;
            worst_a = worst_a.min(base - ja);
            worst_u = worst_u.min(ju - base);
        }
        out.push((scale, worst_a, worst_u));
    }
    Ok(out)
}
