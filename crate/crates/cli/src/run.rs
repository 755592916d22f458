use std::fs;
use std::path::PathBuf;

use barrier_lqr::lti::{violation_measure, Problem};
use barrier_lqr::shooting::{solve_tpbvp, unconstrained_reference, ShootingResult};
use barrier_lqr::verify::{
    direct_value_oracle, duality_audit, fmt_num, m_sweep, saddle_audit, DualityGridSpec, SaddleSpec, Table, TranscriptionSpec,
};
use log::info;
use nalgebra::DVector;

use crate::output::{phase_plot, summary_table, trajectory_table, write_table, write_text, Summary};
use crate::scenario::{Mode, Scenario};
use crate::{CliError, EXIT_NOT_CONVERGED, EXIT_OK};

/// Overrides applied on top of a scenario file.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub grid_n: Option<usize>,
    /// Parent directory; each scenario writes into `out/<name>`.
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub name: String,
    pub dir: PathBuf,
    pub exit_code: i32,
    pub message: String,
}

struct Ctx {
    problem: Problem,
    x: DVector<f64>,
    dir: PathBuf,
    grid_n: usize,
}

fn prepare(s: &Scenario, opts: &RunOptions) -> Result<Ctx, CliError> {
    let problem = s.problem()?;
    let x = s.initial()?;
    let dir = output_dir(s, opts);
    fs::create_dir_all(&dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let grid_n = opts.grid_n.unwrap_or(s.grid_n);
    if grid_n == 0 {
        return Err(CliError::Config("grid_N must be positive".into()));
    }
    Ok(Ctx { problem, x, dir, grid_n })
}

fn constrained_summary(s: &Scenario, p: &Problem, r: &ShootingResult) -> Summary {
    Summary {
        name: s.name.clone(),
        mode: s.mode.to_string(),
        value: r.value,
        residual: r.residual,
        max_alpha: r.alpha.max(),
        violation_measure: violation_measure(p, &r.trajectory),
        iterations: r.iterations,
        max_state_norm: r.trajectory.max_norm(),
        terminal_error: (r.trajectory.terminal() - p.target()).norm(),
        converged: r.converged,
    }
}

fn solve_and_write(s: &Scenario, ctx: &Ctx) -> Result<(ShootingResult, Summary), CliError> {
    let grid = ctx.problem.grid(ctx.grid_n)?;
    let r = solve_tpbvp(&ctx.problem, &ctx.x, &s.shooting_config()?, &grid)?;
    if !r.value.is_finite() || r.trajectory.states.iter().any(|x| !x.iter().all(|v| v.is_finite())) {
        return Err(CliError::Invariant("solution contains non-finite values".into()));
    }
    let summary = constrained_summary(s, &ctx.problem, &r);
    write_table(&ctx.dir.join("trajectory.csv"), &trajectory_table(&r.trajectory, &r.control, &r.alpha))?;
    write_table(&ctx.dir.join("summary.csv"), &summary_table(std::slice::from_ref(&summary)))?;
    let svg = phase_plot(&[(s.name.as_str(), &r.trajectory)], ctx.problem.barrier_radius());
    write_text(&ctx.dir.join("phase.svg"), &svg)?;
    Ok((r, summary))
}

fn finish(s: &Scenario, dir: PathBuf, converged: bool, message: String) -> Outcome {
    Outcome {
        name: s.name.clone(),
        dir,
        exit_code: if converged { EXIT_OK } else { EXIT_NOT_CONVERGED },
        message,
    }
}

/// Runs a scenario according to its mode and writes its artifacts.
pub fn run_scenario(s: &Scenario, opts: &RunOptions) -> Result<Outcome, CliError> {
    match s.mode {
        Mode::Constrained => {
            let ctx = prepare(s, opts)?;
            let (_, sum) = solve_and_write(s, &ctx)?;
            let msg = format!(
                "value {} residual {:.2e} max alpha {:.4} max |xi| {:.4}",
                fmt_num(sum.value),
                sum.residual,
                sum.max_alpha,
                sum.max_state_norm
            );
            Ok(finish(s, ctx.dir, sum.converged, msg))
        }
        Mode::UnconstrainedReference => run_reference(s, opts),
        Mode::MSweep => {
            let levels = s.m_list.clone().ok_or_else(|| CliError::Config("mode m_sweep needs M_list".into()))?;
            run_sweep(s, &levels, opts)
        }
        Mode::Audits => run_audits(s, opts),
    }
}

fn run_reference(s: &Scenario, opts: &RunOptions) -> Result<Outcome, CliError> {
    let ctx = prepare(s, opts)?;
    let p = &ctx.problem;
    let grid = p.grid(ctx.grid_n)?;
    let r = unconstrained_reference(p, &ctx.x, &grid)?;
    let summary = Summary {
        name: s.name.clone(),
        mode: s.mode.to_string(),
        value: r.lqr_value,
        residual: 0.0,
        max_alpha: r.diagnostic_alpha.max(),
        violation_measure: violation_measure(p, &r.trajectory),
        iterations: 0,
        max_state_norm: r.trajectory.max_norm(),
        terminal_error: (r.trajectory.terminal() - p.target()).norm(),
        converged: true,
    };
    write_table(&ctx.dir.join("trajectory.csv"), &trajectory_table(&r.trajectory, &r.control, &r.diagnostic_alpha))?;
    write_table(&ctx.dir.join("summary.csv"), &summary_table(std::slice::from_ref(&summary)))?;
    write_text(&ctx.dir.join("phase.svg"), &phase_plot(&[(s.name.as_str(), &r.trajectory)], p.barrier_radius()))?;
    let msg = format!(
        "lqr value {} diagnostic max alpha {:.4} violation measure {:.4}",
        fmt_num(r.lqr_value),
        summary.max_alpha,
        summary.violation_measure
    );
    Ok(finish(s, ctx.dir, true, msg))
}

/// Solves at each level of `levels` and writes `sweep.csv`.
pub fn run_sweep(s: &Scenario, levels: &[f64], opts: &RunOptions) -> Result<Outcome, CliError> {
    let ctx = prepare(s, opts)?;
    let grid = ctx.problem.grid(ctx.grid_n)?;
    let report = m_sweep(&ctx.problem, &ctx.x, levels, &s.shooting_config()?, &grid, None)?;
    info!("{report}");
    write_table(&ctx.dir.join("sweep.csv"), &report.table())?;
    let msg = format!(
        "values nondecreasing: {}, measures nonincreasing: {}, beta decreasing: {}",
        report.values_nondecreasing(1e-4),
        report.measures_nonincreasing(1.0),
        report.beta_strictly_decreasing()
    );
    Ok(finish(s, ctx.dir, report.all_converged(), msg))
}

fn duality_levels(p: &Problem) -> Vec<f64> {
    let lo = p.dual().alpha_min();
    let mut levels: Vec<f64> = [0.0, 5.0, p.level()].into_iter().filter(|&m| m >= lo).collect();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    levels
}

/// Constrained solve followed by the saddle, duality and oracle audits.
pub fn run_audits(s: &Scenario, opts: &RunOptions) -> Result<Outcome, CliError> {
    let ctx = prepare(s, opts)?;
    let p = &ctx.problem;
    let (r, sum) = solve_and_write(s, &ctx)?;

    let mut spec = SaddleSpec::default();
    if let Some(seed) = opts.seed {
        spec.seed = seed;
    }
    let saddle = saddle_audit(p, &ctx.x, &r, &spec)?;
    write_table(&ctx.dir.join("saddle.csv"), &saddle.table())?;

    let duality = duality_audit(p.dual(), &duality_levels(p), &DualityGridSpec::default())?;
    write_table(&ctx.dir.join("duality.csv"), &duality.table())?;

    let grid = r.trajectory.grid;
    let oracle = direct_value_oracle(p, &ctx.x, &TranscriptionSpec::default(), Some((&r.control, &grid)))?;
    let gap = oracle.value - r.value;
    let mut t = Table {
        header: vec!["shooting_value".into(), "oracle_value".into(), "signed_gap".into(), "relative_gap".into()],
        rows: Vec::new(),
    };
    t.rows.push(vec![fmt_num(r.value), fmt_num(oracle.value), fmt_num(gap), fmt_num(gap.abs() / r.value.abs())]);
    write_table(&ctx.dir.join("oracle.csv"), &t)?;

    let (wa, wu) = (saddle.worst_alpha_margin(), saddle.worst_control_margin());
    let msg = format!(
        "value {} saddle margins {wa:.3e} / {wu:.3e} duality {} oracle gap {gap:.3e}",
        fmt_num(sum.value),
        if duality.all_passed() { "ok" } else { "FAILED" }
    );
    if sum.converged {
        if wa < -1e-6 || wu < -1e-6 {
            return Err(CliError::Invariant(format!("saddle inequality violated: {msg}")));
        }
        if !duality.all_passed() {
            return Err(CliError::Invariant(format!("duality check failed: {msg}")));
        }
        if gap < -1e-6 {
            return Err(CliError::Invariant(format!("oracle below shooting value: {msg}")));
        }
    }
    Ok(finish(s, ctx.dir, sum.converged, msg))
}

/// Reads `BARRIER_LQR_SEED`, if set.
pub fn env_seed() -> Result<Option<u64>, CliError> {
    match std::env::var("BARRIER_LQR_SEED") {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::Config(format!("BARRIER_LQR_SEED must be an unsigned integer, got {v:?}"))),
        Err(_) => Ok(None),
    }
}

pub fn output_dir(s: &Scenario, opts: &RunOptions) -> PathBuf {
    match &opts.out {
        Some(root) => root.join(&s.name),
        None => s.output_dir.clone(),
    }
}
