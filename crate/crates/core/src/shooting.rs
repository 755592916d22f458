//! Shooting over the terminal state for the coupled Riccati / state system.
//!
//! For a guessed terminal state `xi_t` the Riccati flows and the closed-loop
//! state are integrated together backwards from `s = t`, with the penalty
//! level chosen pointwise by the maximizer of the truncated barrier. The
//! guess is adjusted by Nelder-Mead until the reached initial state matches
//! the prescribed one.

use log::{debug, warn};
use nalgebra::DVector;

use crate::lti::{game_cost, simulate, truncated_cost_along, ControlSignal, Grid, Problem, Schedule, Trajectory};
use crate::nelder_mead::{self, Termination};
use crate::ode::Rk4;
use crate::riccati::{closed_loop_rollout, integrate_components, Flow, terminal_affine, RiccatiLayout, RiccatiSolution};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShootingConfig {
    /// Nelder-Mead iterations per run.
    pub max_iters: usize,
    pub simplex_init_radius: f64,
    pub residual_tol: f64,
    /// Extra Nelder-Mead runs after the first one fails to converge.
    pub restart_count: usize,
    /// Relaxation factor of the forward-backward sweep used to seed restarts.
    pub fixed_point_damping: f64,
    /// Simplex diameter at which a run is considered collapsed.
    pub simplex_tol: f64,
}

impl Default for ShootingConfig {
    fn default() -> Self {
        ShootingConfig {
            max_iters: 2000,
            simplex_init_radius: 0.5,
            residual_tol: 1e-6,
            restart_count: 3,
            fixed_point_damping: 0.5,
            simplex_tol: 1e-13,
        }
    }
}

impl ShootingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters < 1 {
            return Err(Error::param("max_iters must be at least 1"));
        }
        if !(self.residual_tol > 0.0) {
            return Err(Error::param("residual_tol must be positive"));
        }
        if !(self.simplex_init_radius > 0.0) || !self.simplex_init_radius.is_finite() {
            return Err(Error::param("simplex_init_radius must be positive"));
        }
        if !(self.fixed_point_damping > 0.0 && self.fixed_point_damping <= 1.0) {
            return Err(Error::param("fixed_point_damping must lie in (0, 1]"));
        }
        if !(self.simplex_tol >= 0.0) {
            return Err(Error::param("simplex_tol must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ShootingResult {
    pub terminal_state: DVector<f64>,
    pub trajectory: Trajectory,
    pub control: ControlSignal,
    pub alpha: Schedule,
    pub riccati: RiccatiSolution,
    /// `J(x, u*, alpha*)`.
    pub value: f64,
    /// `|x - xi_0|`.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Stacked layout `[P, Q, R, xi]`.
struct SweepLayout {
    riccati: RiccatiLayout,
}

impl SweepLayout {
    fn xi_offset(&self) -> usize {
        self.riccati.len()
    }

    fn len(&self) -> usize {
        self.riccati.len() + self.riccati.n
    }

    fn xi(&self, y: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(&y[self.xi_offset()..])
    }
}

/// Backward RK4 of the stacked system, calling `on_node` with the flat state
/// at every node from `s = t` down to `s = 0`.
fn integrate_sweep<F>(problem: &Problem, xi_t: &DVector<f64>, grid: &Grid, layout: &SweepLayout, mut on_node: F) -> Result<()>
where
    F: FnMut(&[f64]),
{
    let trunc = problem.truncation();
    let k_weight = problem.state_weight();
    let mut flow = Flow::new(problem.plant(), problem.kappa());
    let h = grid.step();
    let steps = grid.steps();
    let off = layout.xi_offset();

    let (q_t, r_t) = terminal_affine(problem);
    let mut y = vec![0.0; layout.len()];
    layout.riccati.pack(problem.terminal_weight(), &q_t, r_t, &mut y);
    y[off..].copy_from_slice(xi_t.as_slice());

    let mut rhs = |_tau: f64, yy: &[f64], out: &mut [f64]| {
        let xi = &yy[off..];
        let rho: f64 = xi.iter().map(|v| v * v).sum();
        flow.rates(&yy[..off], k_weight + trunc.weight(rho), trunc.alpha_star(rho), &mut out[..off]);
        flow.state_rate(xi, &mut out[off..]);
    };

    let mut rk = Rk4::new(layout.len());
    on_node(&y);
    for j in 0..steps {
        rk.step(&mut rhs, j as f64 * h, &mut y, h);
        layout.riccati.symmetrize(&mut y);
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::IntegrationDiverged {
                time: grid.time(steps - 1 - j),
            });
        }
        on_node(&y);
    }
    Ok(())
}

fn check_sweep_inputs(problem: &Problem, x: &DVector<f64>, xi_t: &DVector<f64>, grid: &Grid) -> Result<SweepLayout> {
    let n = problem.plant().state_dim();
    if xi_t.len() != n || x.len() != n {
        return Err(Error::shape("state dimension"));
    }
    if (grid.horizon() - problem.horizon()).abs() > 1e-12 * problem.horizon() {
        return Err(Error::shape("grid horizon differs from problem horizon"));
    }
    Ok(SweepLayout {
        riccati: RiccatiLayout { n },
    })
}

/// Integrates the coupled system backwards from `(P_t, -P_t z, <z, P_t z>, xi_t)`
/// and returns the Riccati solution, the state trajectory and `|x - xi_0|`.
pub fn backward_sweep(
    problem: &Problem,
    x: &DVector<f64>,
    xi_t: &DVector<f64>,
    grid: &Grid,
) -> Result<(RiccatiSolution, Trajectory, f64)> {
    let layout = check_sweep_inputs(problem, x, xi_t, grid)?;
    let mut p_rev = Vec::with_capacity(grid.nodes());
    let mut q_rev = Vec::with_capacity(grid.nodes());
    let mut r_rev = Vec::with_capacity(grid.nodes());
    let mut xi_rev = Vec::with_capacity(grid.nodes());
    integrate_sweep(problem, xi_t, grid, &layout, |y| {
        p_rev.push(layout.riccati.p(y));
        q_rev.push(layout.riccati.q(y));
        r_rev.push(layout.riccati.r(y));
        xi_rev.push(layout.xi(y));
    })?;
    p_rev.reverse();
    q_rev.reverse();
    r_rev.reverse();
    xi_rev.reverse();

    let trunc = problem.truncation();
    let alpha = Schedule {
        values: xi_rev.iter().map(|xi| trunc.alpha_star(xi.norm_squared())).collect(),
    };
    let residual = (x - &xi_rev[0]).norm();
    let sol = RiccatiSolution::from_parts(problem, *grid, (p_rev, q_rev, r_rev), Some(alpha));
    let traj = Trajectory {
        grid: *grid,
        states: xi_rev,
    };
    Ok((sol, traj, residual))
}

/// `|x - xi_0|` for a terminal guess, `+inf` if the sweep diverges.
fn residual_at(problem: &Problem, x: &DVector<f64>, grid: &Grid, xi_t: &[f64]) -> f64 {
    let xi_t = DVector::from_column_slice(xi_t);
    let Ok(layout) = check_sweep_inputs(problem, x, &xi_t, grid) else {
        return f64::INFINITY;
    };
    let off = layout.xi_offset();
    let mut xi_0 = Vec::new();
    let outcome = integrate_sweep(problem, &xi_t, grid, &layout, |y| {
        xi_0.clear();
        xi_0.extend_from_slice(&y[off..]);
    });
    match outcome {
        Ok(()) => xi_0.iter().zip(x.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt(),
        Err(_) => f64::INFINITY,
    }
}

/// Damped forward-backward iteration: roll the current feedback forward from
/// `x`, then relax the terminal guess toward the state it reaches.
fn fixed_point_guess(
    problem: &Problem,
    x: &DVector<f64>,
    grid: &Grid,
    start: &DVector<f64>,
    damping: f64,
    sweeps: usize,
) -> Option<DVector<f64>> {
    let mut xi_t = start.clone();
    for _ in 0..sweeps {
        let (sol, _, _) = backward_sweep(problem, x, &xi_t, grid).ok()?;
        let (traj, _) = closed_loop_rollout(problem, &sol, x).ok()?;
        xi_t = &xi_t * (1.0 - damping) + traj.terminal() * damping;
    }
    Some(xi_t)
}

/// Solves the two-point boundary value problem by Nelder-Mead shooting over
/// the terminal state, starting from the open-loop endpoint `e^{At} x`.
pub fn solve_tpbvp(problem: &Problem, x: &DVector<f64>, config: &ShootingConfig, grid: &Grid) -> Result<ShootingResult> {
    config.validate()?;
    let n = problem.plant().state_dim();
    if x.len() != n {
        return Err(Error::shape("initial state dimension"));
    }
    if x.norm() >= problem.barrier_radius() {
        warn!("initial state |x| = {} is outside the constraint ball", x.norm());
    }

    let opts = nelder_mead::Options {
        max_iters: config.max_iters,
        diameter_tol: config.simplex_tol,
        value_target: config.residual_tol,
    };
    let objective = |v: &[f64]| residual_at(problem, x, grid, v);

    let open_loop = problem.plant().free_response(x, problem.horizon());
    let mut best_x: Vec<f64> = open_loop.iter().copied().collect();
    let mut best_val = f64::INFINITY;
    let mut iterations = 0;
    let mut converged_ends: Vec<DVector<f64>> = Vec::new();

    let fallbacks = [DVector::zeros(n), problem.target().clone()];
    for run in 0..=config.restart_count {
        let (start, radius) = match run {
            0 => (best_x.clone(), config.simplex_init_radius),
            1 => (best_x.clone(), config.simplex_init_radius * 0.1),
            2 => {
                let seed = DVector::from_column_slice(&best_x);
                match fixed_point_guess(problem, x, grid, &seed, config.fixed_point_damping, 20) {
                    Some(g) => (g.iter().copied().collect(), config.simplex_init_radius * 0.1),
                    None => (best_x.clone(), config.simplex_init_radius),
                }
            }
            _ => {
                let f = &fallbacks[(run - 3) % fallbacks.len()];
                (f.iter().copied().collect(), config.simplex_init_radius)
            }
        };
        let m = nelder_mead::minimize(objective, &start, radius, &opts);
        iterations += m.iterations;
        debug!("shooting run {run}: residual {:e} after {} iterations", m.value, m.iterations);
        if m.value <= config.residual_tol {
            converged_ends.push(DVector::from_column_slice(&m.x));
        }
        if m.value < best_val {
            best_val = m.value;
            best_x = m.x;
        }
        if best_val <= config.residual_tol || m.termination == Termination::ValueTarget {
            break;
        }
    }
    if converged_ends.len() > 1 {
        let spread = converged_ends.iter().map(|e| (e - &converged_ends[0]).norm()).fold(0.0, f64::max);
        if spread > 1e-4 {
            warn!("shooting converged to terminal states {spread:e} apart; the boundary value problem may have several solutions");
        }
    }

    let terminal_state = DVector::from_column_slice(&best_x);
    let (riccati, trajectory, residual) = backward_sweep(problem, x, &terminal_state, grid)?;
    let alpha = riccati.alpha.clone().expect("sweep records its schedule");
    let control = ControlSignal {
        samples: trajectory
            .states
            .iter()
            .enumerate()
            .map(|(k, xi)| riccati.feedback(&riccati.p[k], &riccati.q[k], xi))
            .collect(),
    };
    let value = game_cost(problem, x, &control, &alpha, grid)?;
    Ok(ShootingResult {
        terminal_state,
        trajectory,
        control,
        alpha,
        riccati,
        value,
        residual,
        iterations,
        converged: residual <= config.residual_tol,
    })
}

/// Synthesis without the barrier: standard LQR with state weight `K`.
#[derive(Debug, Clone)]
pub struct ReferenceResult {
    pub trajectory: Trajectory,
    pub control: ControlSignal,
    pub riccati: RiccatiSolution,
    /// `alpha_M^*(|xi_s|^2)` evaluated along the reference trajectory.
    pub diagnostic_alpha: Schedule,
    /// Cost without the barrier term, the quantity the LQR synthesis minimizes.
    pub lqr_value: f64,
    /// Truncated cost of the same control with the barrier term included.
    pub truncated_value: f64,
}

/// Solves the problem with the barrier term dropped and evaluates the
/// maximizing penalty level along the resulting trajectory.
pub fn unconstrained_reference(problem: &Problem, x: &DVector<f64>, grid: &Grid) -> Result<ReferenceResult> {
    if x.len() != problem.plant().state_dim() {
        return Err(Error::shape("initial state dimension"));
    }
    let (q_t, r_t) = terminal_affine(problem);
    let k_weight = problem.state_weight();
    let parts = integrate_components(
        problem.plant(),
        problem.kappa(),
        (problem.terminal_weight(), &q_t, r_t),
        grid,
        |_, _| (k_weight, 0.0),
    )?;
    let riccati = RiccatiSolution::from_parts(problem, *grid, parts, None);
    let (trajectory, control) = closed_loop_rollout(problem, &riccati, x)?;
    let trunc = problem.truncation();
    let diagnostic_alpha = Schedule {
        values: trajectory.states.iter().map(|xi| trunc.alpha_star(xi.norm_squared())).collect(),
    };
    let traj = simulate(problem.plant(), x, &control, grid)?;
    let running = traj.states.iter().map(|xi| 0.5 * k_weight * xi.norm_squared());
    let lqr_value =
        grid.trapezoid(running) + 0.5 * problem.kappa() * control.energy(grid) + problem.terminal_cost(traj.terminal());
    let truncated_value = truncated_cost_along(problem, &traj, &control);
    Ok(ReferenceResult {
        trajectory,
        control,
        riccati,
        diagnostic_alpha,
        lqr_value,
        truncated_value,
    })
}
