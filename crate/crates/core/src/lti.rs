//! Linear time-invariant dynamics, problem data, trajectory generation and the
//! cost functionals of the constrained regulator and its game form.
//!
//! Trajectories and costs share one uniform grid: the state is advanced by
//! fixed-step RK4 with the control interpolated linearly between nodes, and
//! every running cost is integrated by the composite trapezoid rule on the
//! same nodes.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::barrier::{DualBarrier, Truncation};
use crate::ode::rk4_step;
use crate::{Error, ExtReal, Result};

pub const DEFAULT_GRID_STEPS: usize = 2000;

/// `xi' = A xi + B u`.
#[derive(Debug, Clone, PartialEq)]
pub struct Plant {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
}

impl Plant {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::shape(format!("A must be square, got {}x{}", a.nrows(), a.ncols())));
        }
        if b.nrows() != a.nrows() || b.ncols() == 0 {
            return Err(Error::shape(format!(
                "B must be {}xm with m >= 1, got {}x{}",
                a.nrows(),
                b.nrows(),
                b.ncols()
            )));
        }
        if b.iter().all(|&v| v == 0.0) {
            return Err(Error::param("B must have a nonzero entry"));
        }
        if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(Error::param("plant matrices must be finite"));
        }
        Ok(Plant { a, b })
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    /// `e^{A t} x`.
    pub fn free_response(&self, x: &DVector<f64>, t: f64) -> DVector<f64> {
        (&self.a * t).exp() * x
    }
}

/// Uniform time grid `s_k = k h`, `h = horizon / steps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    steps: usize,
    horizon: f64,
}

impl Grid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if steps < 2 {
            return Err(Error::param(format!("grid needs at least 2 steps, got {steps}")));
        }
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::param(format!("horizon must be positive, got {horizon}")));
        }
        Ok(Grid { steps, horizon })
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn nodes(&self) -> usize {
        self.steps + 1
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn step(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        if k == self.steps {
            self.horizon
        } else {
            k as f64 * self.step()
        }
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.nodes()).map(|k| self.time(k))
    }

    /// Composite trapezoid rule over node values.
    pub fn trapezoid(&self, values: impl IntoIterator<Item = f64>) -> f64 {
        let last = self.steps;
        let sum: f64 = values
            .into_iter()
            .enumerate()
            .map(|(k, v)| if k == 0 || k == last { 0.5 * v } else { v })
            .sum();
        sum * self.step()
    }

    /// Index of the interval containing `s` and the fractional position in it.
    pub(crate) fn locate(&self, s: f64) -> Result<(usize, f64)> {
        let tol = 1e-12 * self.horizon;
        if !(s >= -tol && s <= self.horizon + tol) {
            return Err(Error::domain(format!("time {s} outside [0, {}]", self.horizon)));
        }
        let pos = (s / self.step()).clamp(0.0, self.steps as f64);
        let k = (pos.floor() as usize).min(self.steps - 1);
        Ok((k, pos - k as f64))
    }
}

/// Control samples at grid nodes, piecewise linear in time.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSignal {
    pub samples: Vec<DVector<f64>>,
}

impl ControlSignal {
    pub fn zeros(m: usize, grid: &Grid) -> Self {
        ControlSignal {
            samples: vec![DVector::zeros(m); grid.nodes()],
        }
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(f64) -> DVector<f64>) -> Self {
        ControlSignal {
            samples: grid.times().map(f).collect(),
        }
    }

    pub(crate) fn check(&self, m: usize, grid: &Grid) -> Result<()> {
        if self.samples.len() != grid.nodes() {
            return Err(Error::shape(format!(
                "control has {} samples, grid has {} nodes",
                self.samples.len(),
                grid.nodes()
            )));
        }
        if let Some(bad) = self.samples.iter().find(|u| u.len() != m) {
            return Err(Error::shape(format!("control sample of length {}, expected {m}", bad.len())));
        }
        Ok(())
    }

    /// Squared L2 norm by the trapezoid rule.
    pub fn energy(&self, grid: &Grid) -> f64 {
        grid.trapezoid(self.samples.iter().map(|u| u.norm_squared()))
    }
}

impl std::ops::Add for &ControlSignal {
    type Output = ControlSignal;

    fn add(self, rhs: &ControlSignal) -> ControlSignal {
        ControlSignal {
            samples: self.samples.iter().zip(&rhs.samples).map(|(a, b)| a + b).collect(),
        }
    }
}

/// State samples at grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub grid: Grid,
    pub states: Vec<DVector<f64>>,
}

impl Trajectory {
    pub fn norms(&self) -> impl Iterator<Item = f64> + '_ {
        self.states.iter().map(|x| x.norm())
    }

    pub fn max_norm(&self) -> f64 {
        self.norms().fold(0.0, f64::max)
    }

    pub fn initial(&self) -> &DVector<f64> {
        &self.states[0]
    }

    pub fn terminal(&self) -> &DVector<f64> {
        &self.states[self.states.len() - 1]
    }
}

/// Penalty levels `alpha_s` at grid nodes, piecewise linear in time.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub values: Vec<f64>,
}

impl Schedule {
    pub fn constant(value: f64, grid: &Grid) -> Self {
        Schedule {
            values: vec![value; grid.nodes()],
        }
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub(crate) fn check(&self, problem: &Problem, grid: &Grid) -> Result<()> {
        if self.values.len() != grid.nodes() {
            return Err(Error::shape(format!(
                "schedule has {} samples, grid has {} nodes",
                self.values.len(),
                grid.nodes()
            )));
        }
        let (lo, hi) = (problem.dual().alpha_min(), problem.level());
        if let Some(bad) = self.values.iter().find(|&&a| !(a >= lo && a <= hi)) {
            return Err(Error::param(format!("penalty level {bad} outside [{lo}, {hi}]")));
        }
        Ok(())
    }
}

/// A constrained regulator instance: plant, horizon, weights, terminal cost
/// `1/2 <x - z, P_t (x - z)>`, barrier and truncation level `M`.
#[derive(Debug, Clone)]
pub struct Problem {
    plant: Plant,
    horizon: f64,
    state_weight: f64,
    kappa: f64,
    terminal_weight: DMatrix<f64>,
    target: DVector<f64>,
    truncation: Truncation,
}

impl Problem {
    /// Validates the data. The state weight must satisfy `K >= -phi'(0)` so
    /// the running cost stays bounded below.
    pub fn new(
        plant: Plant,
        horizon: f64,
        state_weight: f64,
        kappa: f64,
        terminal_weight: DMatrix<f64>,
        target: DVector<f64>,
        dual: DualBarrier,
        level: f64,
    ) -> Result<Self> {
        let n = plant.state_dim();
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::param(format!("horizon must be positive, got {horizon}")));
        }
        if !(kappa.is_finite() && kappa > 0.0) {
            return Err(Error::param(format!("kappa must be positive, got {kappa}")));
        }
        if !state_weight.is_finite() || state_weight + dual.slope0() < 0.0 {
            return Err(Error::param(format!(
                "state weight K = {state_weight} violates K >= -phi'(0) = {}",
                -dual.slope0()
            )));
        }
        if terminal_weight.shape() != (n, n) {
            return Err(Error::shape(format!("P_t must be {n}x{n}")));
        }
        if target.len() != n {
            return Err(Error::shape(format!("z must have length {n}")));
        }
        let asym = (&terminal_weight - terminal_weight.transpose()).amax();
        if asym > 1e-12 * terminal_weight.amax().max(1.0) {
            return Err(Error::param("P_t must be symmetric"));
        }
        let min_eig = SymmetricEigen::new(terminal_weight.clone()).eigenvalues.min();
        if min_eig < -1e-10 {
            return Err(Error::param(format!("P_t must be positive semidefinite, min eigenvalue {min_eig}")));
        }
        let truncation = dual.truncate(level)?;
        Ok(Problem {
            plant,
            horizon,
            state_weight,
            kappa,
            terminal_weight,
            target,
            truncation,
        })
    }

    /// Same problem at a different truncation level.
    pub fn with_level(&self, level: f64) -> Result<Self> {
        let mut p = self.clone();
        p.truncation = self.dual().truncate(level)?;
        Ok(p)
    }

    pub fn plant(&self) -> &Plant {
        &self.plant
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// `K`.
    pub fn state_weight(&self) -> f64 {
        self.state_weight
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// `P_t`.
    pub fn terminal_weight(&self) -> &DMatrix<f64> {
        &self.terminal_weight
    }

    /// `z`.
    pub fn target(&self) -> &DVector<f64> {
        &self.target
    }

    pub fn dual(&self) -> &DualBarrier {
        self.truncation.dual()
    }

    pub fn truncation(&self) -> &Truncation {
        &self.truncation
    }

    /// `M`.
    pub fn level(&self) -> f64 {
        self.truncation.level()
    }

    pub fn barrier_radius(&self) -> f64 {
        self.dual().spec().b()
    }

    pub fn grid(&self, steps: usize) -> Result<Grid> {
        Grid::new(self.horizon, steps)
    }

    /// `Psi(x) = 1/2 <x - z, P_t (x - z)>`.
    pub fn terminal_cost(&self, x: &DVector<f64>) -> f64 {
        let d = x - &self.target;
        0.5 * d.dot(&(&self.terminal_weight * &d))
    }

    fn check_grid(&self, grid: &Grid) -> Result<()> {
        if (grid.horizon() - self.horizon).abs() > 1e-12 * self.horizon {
            return Err(Error::shape(format!(
                "grid horizon {} differs from problem horizon {}",
                grid.horizon(),
                self.horizon
            )));
        }
        Ok(())
    }
}

/// Integrates `xi' = A xi + B u` from `x0` by RK4 on the grid.
pub fn simulate(plant: &Plant, x0: &DVector<f64>, u: &ControlSignal, grid: &Grid) -> Result<Trajectory> {
    let n = plant.state_dim();
    if x0.len() != n {
        return Err(Error::shape(format!("initial state has length {}, expected {n}", x0.len())));
    }
    u.check(plant.input_dim(), grid)?;
    let h = grid.step();
    let mut states = Vec::with_capacity(grid.nodes());
    states.push(x0.clone());
    let mut y: Vec<f64> = x0.iter().copied().collect();
    for k in 0..grid.steps() {
        let (u0, u1) = (&u.samples[k], &u.samples[k + 1]);
        let t0 = grid.time(k);
        let mut rhs = |t: f64, x: &[f64], out: &mut [f64]| {
            let theta = ((t - t0) / h).clamp(0.0, 1.0);
            let uu = u0 * (1.0 - theta) + u1 * theta;
            let xv = DVector::from_column_slice(x);
            let dx = plant.a() * xv + plant.b() * uu;
            out.copy_from_slice(dx.as_slice());
        };
        y = rk4_step(&mut rhs, t0, &y, h);
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::IntegrationDiverged { time: grid.time(k + 1) });
        }
        states.push(DVector::from_column_slice(&y));
    }
    Ok(Trajectory { grid: *grid, states })
}

fn check_inputs(problem: &Problem, x0: &DVector<f64>, grid: &Grid) -> Result<()> {
    problem.check_grid(grid)?;
    if x0.len() != problem.plant().state_dim() {
        return Err(Error::shape("initial state dimension"));
    }
    Ok(())
}

/// Cost of the exact problem,
/// `int K/2 |xi|^2 + 1/2 Phi(|xi|^2) + kappa/2 |u|^2 ds + Psi(xi_t)`.
/// Any node with `|xi| >= b` makes the cost `+inf`.
pub fn cost_exact(problem: &Problem, x0: &DVector<f64>, u: &ControlSignal, grid: &Grid) -> Result<ExtReal> {
    check_inputs(problem, x0, grid)?;
    let traj = simulate(problem.plant(), x0, u, grid)?;
    let dual = problem.dual();
    let mut running = Vec::with_capacity(grid.nodes());
    for x in &traj.states {
        let rho = x.norm_squared();
        match dual.barrier_value(rho) {
            ExtReal::Finite(phi) => running.push(0.5 * problem.state_weight() * rho + 0.5 * phi),
            ExtReal::PosInf => return Ok(ExtReal::PosInf),
        }
    }
    let total = grid.trapezoid(running)
        + 0.5 * problem.kappa() * u.energy(grid)
        + problem.terminal_cost(traj.terminal());
    Ok(ExtReal::Finite(total))
}

/// Cost of the truncated problem, with `Phi` replaced by `Phi^M`. Always finite.
pub fn cost_truncated(problem: &Problem, x0: &DVector<f64>, u: &ControlSignal, grid: &Grid) -> Result<f64> {
    check_inputs(problem, x0, grid)?;
    let traj = simulate(problem.plant(), x0, u, grid)?;
    Ok(truncated_cost_along(problem, &traj, u))
}

pub(crate) fn truncated_cost_along(problem: &Problem, traj: &Trajectory, u: &ControlSignal) -> f64 {
    let grid = &traj.grid;
    let trunc = problem.truncation();
    let running = traj.states.iter().map(|x| {
        let rho = x.norm_squared();
        0.5 * problem.state_weight() * rho + 0.5 * trunc.value_nonneg(rho)
    });
    grid.trapezoid(running) + 0.5 * problem.kappa() * u.energy(grid) + problem.terminal_cost(traj.terminal())
}

/// Cost of the game for a fixed penalty schedule,
/// `int nu(xi, alpha) + kappa/2 |u|^2 ds + Psi(xi_t)` with
/// `nu(x, alpha) = K/2 |x|^2 + 1/2 (a^{-1}(alpha) |x|^2 - alpha)`.
pub fn game_cost(
    problem: &Problem,
    x0: &DVector<f64>,
    u: &ControlSignal,
    alpha: &Schedule,
    grid: &Grid,
) -> Result<f64> {
    check_inputs(problem, x0, grid)?;
    alpha.check(problem, grid)?;
    let traj = simulate(problem.plant(), x0, u, grid)?;
    game_cost_along(problem, &traj, u, alpha)
}

pub(crate) fn game_cost_along(problem: &Problem, traj: &Trajectory, u: &ControlSignal, alpha: &Schedule) -> Result<f64> {
    let grid = &traj.grid;
    let dual = problem.dual();
    let mut running = Vec::with_capacity(grid.nodes());
    for (x, &a) in traj.states.iter().zip(&alpha.values) {
        let rho = x.norm_squared();
        running.push(0.5 * problem.state_weight() * rho + 0.5 * (dual.a_inv(a)? * rho - a));
    }
    Ok(grid.trapezoid(running) + 0.5 * problem.kappa() * u.energy(grid) + problem.terminal_cost(traj.terminal()))
}

/// Measure of `{s : |xi_s| >= b}`, with crossing times located by linear
/// interpolation of `|xi_s| - b` between nodes.
pub fn violation_measure(problem: &Problem, traj: &Trajectory) -> f64 {
    measure_outside(traj, problem.barrier_radius())
}

/// Measure of `{s : |xi_s| >= radius}` with linearly interpolated crossings.
pub fn measure_outside(traj: &Trajectory, radius: f64) -> f64 {
    let h = traj.grid.step();
    let gaps: Vec<f64> = traj.norms().map(|r| r - radius).collect();
    gaps.windows(2)
        .map(|w| {
            let (g0, g1) = (w[0], w[1]);
            match (g0 >= 0.0, g1 >= 0.0) {
                (true, true) => h,
                (false, false) => 0.0,
                (true, false) => h * g0 / (g0 - g1),
                (false, true) => h * g1 / (g1 - g0),
            }
        })
        .sum()
}
