use nalgebra::{DMatrix, DVector};

use crate::lti::{ControlSignal, Grid, Problem};
use crate::nelder_mead::{self, Termination};
use crate::{Error, Result};

/// Piecewise-constant control transcription used by the value oracle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TranscriptionSpec {
    pub segments: usize,
    /// Nelder-Mead iterations per pass.
    pub optimizer_iters: usize,
    /// Initial simplex radius around each start.
    pub perturbation_scale: f64,
}

impl Default for TranscriptionSpec {
    fn default() -> Self {
        TranscriptionSpec {
            segments: 40,
            optimizer_iters: 20_000,
            perturbation_scale: 0.5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OracleResult {
    pub value: f64,
    /// One control value per segment.
    pub controls: Vec<DVector<f64>>,
    /// Best value reached from each start, in the order tried.
    pub start_values: Vec<f64>,
}

/// Exact zero-order-hold propagation on a fine uniform sub-grid.
struct Transcription<'a> {
    problem: &'a Problem,
    n: usize,
    m: usize,
    segments: usize,
    substeps: usize,
    seg_len: f64,
    ad: Vec<f64>,
    bd: Vec<f64>,
}

impl<'a> Transcription<'a> {
    fn new(problem: &'a Problem, segments: usize) -> Self {
        let plant = problem.plant();
        let (n, m) = (plant.state_dim(), plant.input_dim());
        let seg_len = problem.horizon() / segments as f64;
        let substeps = (seg_len / 1e-3).ceil().max(4.0) as usize;
        let delta = seg_len / substeps as f64;
        // exp([[A, B], [0, 0]] delta) = [[Ad, Bd], [0, I]]
        let mut big = DMatrix::zeros(n + m, n + m);
        big.view_mut((0, 0), (n, n)).copy_from(plant.a());
        big.view_mut((0, n), (n, m)).copy_from(plant.b());
        let e = (big * delta).exp();
        let ad = e.view((0, 0), (n, n)).transpose().as_slice().to_vec();
        let bd = e.view((0, n), (n, m)).transpose().as_slice().to_vec();
        Transcription {
            problem,
            n,
            m,
            segments,
            substeps,
            seg_len,
            ad,
            bd,
        }
    }

    fn cost(&self, x0: &[f64], u: &[f64]) -> f64 {
        let (n, m) = (self.n, self.m);
        let trunc = self.problem.truncation();
        let k_weight = self.problem.state_weight();
        let running = |x: &[f64]| {
            let rho: f64 = x.iter().map(|v| v * v).sum();
            0.5 * k_weight * rho + 0.5 * trunc.value_nonneg(rho)
        };
        let delta = self.seg_len / self.substeps as f64;
        let mut x = x0.to_vec();
        let mut next = vec![0.0; n];
        let mut integral = 0.5 * running(&x);
        let total = self.segments * self.substeps;
        let mut step = 0;
        for seg in 0..self.segments {
            let us = &u[seg * m..(seg + 1) * m];
            for _ in 0..self.substeps {
                for i in 0..n {
                    let mut v = 0.0;
                    for j in 0..n {
                        v += self.ad[i * n + j] * x[j];
                    }
                    for j in 0..m {
                        v += self.bd[i * m + j] * us[j];
                    }
                    next[i] = v;
                }
                std::mem::swap(&mut x, &mut next);
                step += 1;
                let w = if step == total { 0.5 } else { 1.0 };
                integral += w * running(&x);
            }
        }
        let energy: f64 = u.iter().map(|v| v * v).sum::<f64>() * self.seg_len;
        integral * delta + 0.5 * self.problem.kappa() * energy + self.problem.terminal_cost(&DVector::from_column_slice(&x))
    }
}

/// Segment averages of a node-sampled control, by midpoint sampling of its
/// piecewise-linear interpolant.
fn segment_averages(u: &ControlSignal, grid: &Grid, segments: usize, m: usize) -> Vec<f64> {
    const SAMPLES: usize = 64;
    let seg_len = grid.horizon() / segments as f64;
    let mut out = vec![0.0; segments * m];
    for seg in 0..segments {
        for q in 0..SAMPLES {
            let s = (seg as f64 + (q as f64 + 0.5) / SAMPLES as f64) * seg_len;
            let pos = (s / grid.step()).min(grid.steps() as f64);
            let k = (pos.floor() as usize).min(grid.steps() - 1);
            let theta = pos - k as f64;
            for j in 0..m {
                let v = u.samples[k][j] * (1.0 - theta) + u.samples[k + 1][j] * theta;
                out[seg * m + j] += v / SAMPLES as f64;
            }
        }
    }
    out
}

/// Minimizes the truncated cost over piecewise-constant controls by
/// Nelder-Mead, starting from zero and, if given, from the segment averages
/// of `warm_start`. The dynamics are propagated exactly per sub-step, so the
/// result does not share any integrator with the shooting solver.
pub fn direct_value_oracle(
    problem: &Problem,
    x: &DVector<f64>,
    spec: &TranscriptionSpec,
    warm_start: Option<(&ControlSignal, &Grid)>,
) -> Result<OracleResult> {
    if spec.segments < 1 {
        return Err(Error::param("transcription needs at least one segment"));
    }
    if x.len() != problem.plant().state_dim() {
        return Err(Error::shape("initial state dimension"));
    }
    let tr = Transcription::new(problem, spec.segments);
    let m = tr.m;
    let x0: Vec<f64> = x.iter().copied().collect();
    let objective = |u: &[f64]| tr.cost(&x0, u);

    let mut starts = vec![vec![0.0; spec.segments * m]];
    if let Some((u, grid)) = warm_start {
        u.check(m, grid)?;
        starts.push(segment_averages(u, grid, spec.segments, m));
    }

    let opts = nelder_mead::Options {
        max_iters: spec.optimizer_iters,
        diameter_tol: 1e-10,
        value_target: f64::NEG_INFINITY,
    };
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut start_values = Vec::new();
    for start in starts {
        let mut point = start;
        let mut value = objective(&point);
        let mut radius = spec.perturbation_scale;
        // restarting at the incumbent counters simplex degeneration in high dimension
        for _ in 0..4 {
            let run = nelder_mead::minimize(objective, &point, radius, &opts);
            let improved = run.value < value - 1e-12 * value.abs().max(1.0);
            if run.value < value {
                value = run.value;
                point = run.x;
            }
            if !improved && run.termination == Termination::SimplexCollapsed {
                break;
            }
            radius *= 0.5;
        }
        start_values.push(value);
        if best.as_ref().map_or(true, |(v, _)| value < *v) {
            best = Some((value, point));
        }
    }
    let (value, point) = best.expect("at least one start");
    Ok(OracleResult {
        value,
        controls: point.chunks(m).map(DVector::from_column_slice).collect(),
        start_values,
    })
}
