//! Differential Riccati final value problems for a fixed penalty schedule.
//!
//! For a schedule `alpha` the inner minimization is an LQR problem with state
//! weight `K + a^{-1}(alpha_s)` and an affine term from the terminal target.
//! Its value is the quadratic `1/2 <(x,1), Phat_s (x,1)>` where
//!
//! ```text
//! -P' = A'P + PA - (1/kappa) P B B' P + (K + a^{-1}(alpha)) I,   P_t = P_t
//! -Q' = (A - (1/kappa) B B' P)' Q,                              Q_t = -P_t z
//! -R' = -alpha - (1/kappa) Q' B B' Q,                           R_t = <z, P_t z>
//! ```
//!
//! All flows are integrated in time-to-go `tau = t - s` with a positive step
//! and stored in forward time order.

use nalgebra::{DMatrix, DVector};

use crate::lti::{ControlSignal, Grid, Plant, Problem, Schedule, Trajectory};
use crate::ode::{rk4_step, Rk4};
use crate::{Error, Result};

/// Block data of the homogenized `(n+1)`-dimensional problem.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedData {
    pub a_hat: DMatrix<f64>,
    pub b_hat: DMatrix<f64>,
    pub p_t_hat: DMatrix<f64>,
}

impl AugmentedData {
    pub fn new(problem: &Problem) -> Self {
        let n = problem.plant().state_dim();
        let m = problem.plant().input_dim();
        let mut a_hat = DMatrix::zeros(n + 1, n + 1);
        a_hat.view_mut((0, 0), (n, n)).copy_from(problem.plant().a());
        let mut b_hat = DMatrix::zeros(n + 1, m);
        b_hat.view_mut((0, 0), (n, m)).copy_from(problem.plant().b());
        let (q_t, r_t) = terminal_affine(problem);
        let mut p_t_hat = DMatrix::zeros(n + 1, n + 1);
        p_t_hat.view_mut((0, 0), (n, n)).copy_from(problem.terminal_weight());
        p_t_hat.view_mut((0, n), (n, 1)).copy_from(&q_t);
        p_t_hat.view_mut((n, 0), (1, n)).copy_from(&q_t.transpose());
        p_t_hat[(n, n)] = r_t;
        AugmentedData { a_hat, b_hat, p_t_hat }
    }

    /// `Vhat_s = diag((K + a^{-1}(alpha)) I_n, -alpha)`.
    pub fn forcing(&self, state_weight: f64, weight: f64, alpha: f64) -> DMatrix<f64> {
        let n = self.a_hat.nrows() - 1;
        let mut v = DMatrix::zeros(n + 1, n + 1);
        for i in 0..n {
            v[(i, i)] = state_weight + weight;
        }
        v[(n, n)] = -alpha;
        v
    }
}

/// `(Q_t, R_t) = (-P_t z, <z, P_t z>)`.
pub(crate) fn terminal_affine(problem: &Problem) -> (DVector<f64>, f64) {
    let pz = problem.terminal_weight() * problem.target();
    let r = problem.target().dot(&pz);
    (-pz, r)
}

/// `(P_s, Q_s, R_s)` sampled on a grid for one penalty schedule.
#[derive(Debug, Clone)]
pub struct RiccatiSolution {
    pub grid: Grid,
    pub p: Vec<DMatrix<f64>>,
    pub q: Vec<DVector<f64>>,
    pub r: Vec<f64>,
    /// The schedule that generated the forcing, or `None` when the barrier
    /// term was left out of the synthesis.
    pub alpha: Option<Schedule>,
    b: DMatrix<f64>,
    kappa: f64,
}

impl RiccatiSolution {
    pub(crate) fn from_parts(
        problem: &Problem,
        grid: Grid,
        (p, q, r): (Vec<DMatrix<f64>>, Vec<DVector<f64>>, Vec<f64>),
        alpha: Option<Schedule>,
    ) -> Self {
        RiccatiSolution {
            grid,
            p,
            q,
            r,
            alpha,
            b: problem.plant().b().clone(),
            kappa: problem.kappa(),
        }
    }

    /// `Phat_s = [[P, Q], [Q', R]]` at node `k`.
    pub fn augmented(&self, k: usize) -> DMatrix<f64> {
        let n = self.q[k].len();
        let mut m = DMatrix::zeros(n + 1, n + 1);
        m.view_mut((0, 0), (n, n)).copy_from(&self.p[k]);
        m.view_mut((0, n), (n, 1)).copy_from(&self.q[k]);
        m.view_mut((n, 0), (1, n)).copy_from(&self.q[k].transpose());
        m[(n, n)] = self.r[k];
        m
    }

    fn interpolate(&self, s: f64) -> Result<(DMatrix<f64>, DVector<f64>, f64)> {
        let (k, theta) = self.grid.locate(s)?;
        let p = &self.p[k] * (1.0 - theta) + &self.p[k + 1] * theta;
        let q = &self.q[k] * (1.0 - theta) + &self.q[k + 1] * theta;
        let r = self.r[k] * (1.0 - theta) + self.r[k + 1] * theta;
        Ok((p, q, r))
    }

    /// `-(1/kappa) B'(P x + Q)`.
    pub(crate) fn feedback(&self, p: &DMatrix<f64>, q: &DVector<f64>, x: &DVector<f64>) -> DVector<f64> {
        -(self.b.transpose() * (p * x + q)) / self.kappa
    }
}

/// Linear interpolation of a node-sampled schedule together with the
/// quadratic weight `a^{-1}(alpha)`, evaluated at node and midpoint stages.
struct ScheduleForcing {
    alpha_nodes: Vec<f64>,
    weight_nodes: Vec<f64>,
    alpha_mid: Vec<f64>,
    weight_mid: Vec<f64>,
}

impl ScheduleForcing {
    fn new(problem: &Problem, alpha: &Schedule) -> Result<Self> {
        let dual = problem.dual();
        let weight_nodes = alpha.values.iter().map(|&a| dual.a_inv(a)).collect::<Result<Vec<_>>>()?;
        let alpha_mid: Vec<f64> = alpha.values.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        let weight_mid = alpha_mid.iter().map(|&a| dual.a_inv(a)).collect::<Result<Vec<_>>>()?;
        Ok(ScheduleForcing {
            alpha_nodes: alpha.values.clone(),
            weight_nodes,
            alpha_mid,
            weight_mid,
        })
    }

    /// `(a^{-1}(alpha), alpha)` at time `s` inside interval `k`.
    fn at(&self, grid: &Grid, k: usize, s: f64) -> (f64, f64) {
        let h = grid.step();
        let theta = (s - grid.time(k)) / h;
        if (theta - 0.5).abs() < 1e-9 {
            (self.weight_mid[k], self.alpha_mid[k])
        } else if theta < 0.25 {
            (self.weight_nodes[k], self.alpha_nodes[k])
        } else {
            (self.weight_nodes[k + 1], self.alpha_nodes[k + 1])
        }
    }
}

/// Flat layout `[P (row-major), Q, R]`.
pub(crate) struct RiccatiLayout {
    pub n: usize,
}

impl RiccatiLayout {
    pub fn len(&self) -> usize {
        self.n * self.n + self.n + 1
    }

    pub fn p(&self, y: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.n, &y[..self.n * self.n])
    }

    pub fn q(&self, y: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(&y[self.n * self.n..self.n * self.n + self.n])
    }

    pub fn r(&self, y: &[f64]) -> f64 {
        y[self.n * self.n + self.n]
    }

    pub fn pack(&self, p: &DMatrix<f64>, q: &DVector<f64>, r: f64, out: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] = p[(i, j)];
            }
        }
        out[n * n..n * n + n].copy_from_slice(q.as_slice());
        out[n * n + n] = r;
    }

    /// Symmetrizes the `P` block in place.
    pub fn symmetrize(&self, y: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            for j in i + 1..n {
                let avg = 0.5 * (y[i * n + j] + y[j * n + i]);
                y[i * n + j] = avg;
                y[j * n + i] = avg;
            }
        }
    }
}

/// Time-to-go derivatives of `(P, Q, R)` on the flat layout:
/// `dP/dtau = A'P + PA - PSP + w I`, `dQ/dtau = (A - SP)'Q`,
/// `dR/dtau = -alpha - Q'SQ` with `S = B B' / kappa`.
pub(crate) struct Flow {
    n: usize,
    a: Vec<f64>,
    s: Vec<f64>,
    sp: Vec<f64>,
    sq: Vec<f64>,
}

impl Flow {
    pub fn new(plant: &Plant, kappa: f64) -> Self {
        let n = plant.state_dim();
        let s_mat = plant.b() * plant.b().transpose() / kappa;
        let row_major = |m: &DMatrix<f64>| m.transpose().as_slice().to_vec();
        Flow {
            n,
            a: row_major(plant.a()),
            s: row_major(&s_mat),
            sp: vec![0.0; n * n],
            sq: vec![0.0; n],
        }
    }

    pub fn rates(&mut self, y: &[f64], weight: f64, alpha: f64, out: &mut [f64]) {
        let n = self.n;
        let (p, rest) = y.split_at(n * n);
        let q = &rest[..n];
        let (a, s) = (&self.a, &self.s);
        for i in 0..n {
            for j in 0..n {
                self.sp[i * n + j] = (0..n).map(|k| s[i * n + k] * p[k * n + j]).sum();
            }
            self.sq[i] = (0..n).map(|k| s[i * n + k] * q[k]).sum();
        }
        let sp = &self.sp;
        for i in 0..n {
            for j in 0..n {
                let mut v = 0.0;
                for k in 0..n {
                    v += a[k * n + i] * p[k * n + j] + p[i * n + k] * (a[k * n + j] - sp[k * n + j]);
                }
                out[i * n + j] = if i == j { v + weight } else { v };
            }
        }
        for i in 0..n {
            out[n * n + i] = (0..n).map(|k| (a[k * n + i] - sp[k * n + i]) * q[k]).sum();
        }
        out[n * n + n] = -alpha - (0..n).map(|k| q[k] * self.sq[k]).sum::<f64>();
    }

    /// `d/dtau xi = -((A - SP) xi - SQ)`, using the `SP`, `SQ` of the last
    /// call to `rates`.
    pub fn state_rate(&self, xi: &[f64], out: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let closed: f64 = (0..n).map(|k| (self.a[i * n + k] - self.sp[i * n + k]) * xi[k]).sum();
            out[i] = self.sq[i] - closed;
        }
    }
}

/// Backward RK4 of the component flows with a stage forcing
/// `(K + extra_weight, alpha)`.
pub(crate) fn integrate_components<F>(
    plant: &Plant,
    kappa: f64,
    terminal: (&DMatrix<f64>, &DVector<f64>, f64),
    grid: &Grid,
    mut forcing: F,
) -> Result<(Vec<DMatrix<f64>>, Vec<DVector<f64>>, Vec<f64>)>
where
    F: FnMut(usize, f64) -> (f64, f64),
{
    let n = plant.state_dim();
    let layout = RiccatiLayout { n };
    let mut flow = Flow::new(plant, kappa);
    let h = grid.step();
    let steps = grid.steps();
    let mut rk = Rk4::new(layout.len());

    let mut y = vec![0.0; layout.len()];
    layout.pack(terminal.0, terminal.1, terminal.2, &mut y);

    let mut p_rev = Vec::with_capacity(grid.nodes());
    let mut q_rev = Vec::with_capacity(grid.nodes());
    let mut r_rev = Vec::with_capacity(grid.nodes());
    p_rev.push(terminal.0.clone());
    q_rev.push(terminal.1.clone());
    r_rev.push(terminal.2);

    for j in 0..steps {
        // interval k = steps - 1 - j, traversed from s_{k+1} down to s_k
        let k = steps - 1 - j;
        let s_end = grid.time(k + 1);
        let mut rhs = |tau: f64, yy: &[f64], out: &mut [f64]| {
            let s = s_end - (tau - j as f64 * h);
            let (weight, alpha) = forcing(k, s);
            flow.rates(yy, weight, alpha, out);
        };
        rk.step(&mut rhs, j as f64 * h, &mut y, h);
        layout.symmetrize(&mut y);
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::IntegrationDiverged { time: grid.time(k) });
        }
        p_rev.push(layout.p(&y));
        q_rev.push(layout.q(&y));
        r_rev.push(layout.r(&y));
    }
    p_rev.reverse();
    q_rev.reverse();
    r_rev.reverse();
    Ok((p_rev, q_rev, r_rev))
}

/// Solves the three component FVPs for `P`, `Q`, `R`.
pub fn solve_fvp_components(problem: &Problem, alpha: &Schedule, grid: &Grid) -> Result<RiccatiSolution> {
    check_grid(problem, grid)?;
    alpha.check(problem, grid)?;
    let forcing = ScheduleForcing::new(problem, alpha)?;
    let (q_t, r_t) = terminal_affine(problem);
    let k_weight = problem.state_weight();
    let parts = integrate_components(
        problem.plant(),
        problem.kappa(),
        (problem.terminal_weight(), &q_t, r_t),
        grid,
        |k, s| {
            let (w, a) = forcing.at(grid, k, s);
            (k_weight + w, a)
        },
    )?;
    Ok(RiccatiSolution::from_parts(problem, *grid, parts, Some(alpha.clone())))
}

/// Solves the single `(n+1)`-dimensional FVP for `Phat` and splits it into
/// blocks.
pub fn solve_fvp_augmented(problem: &Problem, alpha: &Schedule, grid: &Grid) -> Result<RiccatiSolution> {
    check_grid(problem, grid)?;
    alpha.check(problem, grid)?;
    let forcing = ScheduleForcing::new(problem, alpha)?;
    let data = AugmentedData::new(problem);
    let n1 = data.a_hat.nrows();
    let n = n1 - 1;
    let s_hat = &data.b_hat * data.b_hat.transpose() / problem.kappa();
    let h = grid.step();
    let steps = grid.steps();

    let mut y: Vec<f64> = data.p_t_hat.transpose().iter().copied().collect();
    let mut nodes = Vec::with_capacity(grid.nodes());
    nodes.push(data.p_t_hat.clone());
    for j in 0..steps {
        let k = steps - 1 - j;
        let s_end = grid.time(k + 1);
        let mut rhs = |tau: f64, yy: &[f64], out: &mut [f64]| {
            let s = s_end - (tau - j as f64 * h);
            let (w, a) = forcing.at(grid, k, s);
            let p = DMatrix::from_row_slice(n1, n1, yy);
            let d = data.a_hat.transpose() * &p + &p * &data.a_hat - &p * &s_hat * &p
                + data.forcing(problem.state_weight(), w, a);
            out.copy_from_slice(d.transpose().as_slice());
        };
        y = rk4_step(&mut rhs, j as f64 * h, &y, h);
        let mut p = DMatrix::from_row_slice(n1, n1, &y);
        p = (&p + p.transpose()) * 0.5;
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::IntegrationDiverged { time: grid.time(k) });
        }
        y = p.transpose().iter().copied().collect();
        nodes.push(p);
    }
    nodes.reverse();
    let parts = (
        nodes.iter().map(|m| m.view((0, 0), (n, n)).into_owned()).collect(),
        nodes.iter().map(|m| m.view((0, n), (n, 1)).column(0).into_owned()).collect(),
        nodes.iter().map(|m| m[(n, n)]).collect(),
    );
    Ok(RiccatiSolution::from_parts(problem, *grid, parts, Some(alpha.clone())))
}

fn check_grid(problem: &Problem, grid: &Grid) -> Result<()> {
    if (grid.horizon() - problem.horizon()).abs() > 1e-12 * problem.horizon() {
        return Err(Error::shape("grid horizon differs from problem horizon"));
    }
    Ok(())
}

/// `1/2 x'P_s x + Q_s'x + 1/2 R_s`, the optimal cost-to-go from `(s, x)`.
pub fn auxiliary_value(sol: &RiccatiSolution, s: f64, x: &DVector<f64>) -> Result<f64> {
    let (p, q, r) = sol.interpolate(s)?;
    if x.len() != q.len() {
        return Err(Error::shape("state dimension"));
    }
    Ok(0.5 * x.dot(&(&p * x)) + q.dot(x) + 0.5 * r)
}

/// `u = -(1/kappa) B'(P_s x + Q_s)`.
pub fn feedback_control(sol: &RiccatiSolution, s: f64, x: &DVector<f64>) -> Result<DVector<f64>> {
    let (p, q, _) = sol.interpolate(s)?;
    if x.len() != q.len() {
        return Err(Error::shape("state dimension"));
    }
    Ok(sol.feedback(&p, &q, x))
}

/// Forward RK4 of the closed loop under the feedback law of `sol`.
pub fn closed_loop_rollout(
    problem: &Problem,
    sol: &RiccatiSolution,
    x0: &DVector<f64>,
) -> Result<(Trajectory, ControlSignal)> {
    let plant = problem.plant();
    if x0.len() != plant.state_dim() {
        return Err(Error::shape("initial state dimension"));
    }
    let grid = sol.grid;
    let h = grid.step();
    let mut states = Vec::with_capacity(grid.nodes());
    let mut controls = Vec::with_capacity(grid.nodes());
    let mut y: Vec<f64> = x0.iter().copied().collect();
    states.push(x0.clone());
    controls.push(sol.feedback(&sol.p[0], &sol.q[0], x0));
    for k in 0..grid.steps() {
        let t0 = grid.time(k);
        let p_mid = (&sol.p[k] + &sol.p[k + 1]) * 0.5;
        let q_mid = (&sol.q[k] + &sol.q[k + 1]) * 0.5;
        let mut rhs = |t: f64, x: &[f64], out: &mut [f64]| {
            let theta = (t - t0) / h;
            let (p, q) = if theta < 0.25 {
                (&sol.p[k], &sol.q[k])
            } else if theta < 0.75 {
                (&p_mid, &q_mid)
            } else {
                (&sol.p[k + 1], &sol.q[k + 1])
            };
            let xv = DVector::from_column_slice(x);
            let u = sol.feedback(p, q, &xv);
            out.copy_from_slice((plant.a() * &xv + plant.b() * u).as_slice());
        };
        y = rk4_step(&mut rhs, t0, &y, h);
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::IntegrationDiverged { time: grid.time(k + 1) });
        }
        let x = DVector::from_column_slice(&y);
        controls.push(sol.feedback(&sol.p[k + 1], &sol.q[k + 1], &x));
        states.push(x);
    }
    Ok((Trajectory { grid, states }, ControlSignal { samples: controls }))
}
