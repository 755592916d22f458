use std::path::{Path, PathBuf};
use std::process::ExitCode;

use barrier_lqr::barrier::{conjugate, make_log_barrier};
use barrier_lqr_cli::figure::emit_barrier_figure;
use barrier_lqr_cli::run::env_seed;
use barrier_lqr_cli::{builtin, run_audits, run_scenario, run_sweep, CliError, Outcome, RunOptions, Scenario, BUILTIN};
use clap::{Parser, Subcommand};
use rayon::prelude::*;

#[derive(Parser)]
#[command(name = "barrier-lqr", version, about = "Constrained linear regulators via barrier games")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run scenarios according to their mode.
    Solve {
        #[arg(required = true)]
        scenarios: Vec<PathBuf>,
        /// Scenarios solved concurrently.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long = "grid-N")]
        grid_n: Option<usize>,
        /// Writes into DIR/<scenario name> instead of each scenario's output_dir.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve, then run the saddle, duality and transcription audits.
    Audit {
        scenario: PathBuf,
        #[arg(long = "grid-N")]
        grid_n: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve at each truncation level.
    Sweep {
        scenario: PathBuf,
        /// Comma separated levels; defaults to the scenario's M_list.
        #[arg(long = "M", value_delimiter = ',')]
        levels: Option<Vec<f64>>,
        #[arg(long = "grid-N")]
        grid_n: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print a bundled scenario.
    DumpConfig { name: String },
    /// Write the sup-of-quadratics figure data for the log barrier.
    BarrierFigure {
        #[arg(long, default_value_t = 3.0)]
        b: f64,
        #[arg(long = "M", default_value_t = 50.0, allow_negative_numbers = true)]
        level: f64,
        #[arg(long, default_value = "out/barrier_figure")]
        out: PathBuf,
    },
}

fn report(result: Result<Outcome, CliError>) -> i32 {
    match result {
        Ok(o) => {
            let status = if o.exit_code == 0 { "ok" } else { "not converged" };
            println!("{}: {status}: {} ({})", o.name, o.message, o.dir.display());
            o.exit_code
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn load_and<F>(path: &Path, f: F) -> Result<Outcome, CliError>
where
    F: FnOnce(&Scenario) -> Result<Outcome, CliError>,
{
    let s = Scenario::load(path)?;
    f(&s)
}

fn run(cli: Cli) -> i32 {
    match cli.command {
        Command::Solve {
            scenarios,
            jobs,
            grid_n,
            out,
        } => {
            let opts = RunOptions {
                grid_n,
                out,
                seed: None,
            };
            let pool = match rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build() {
                Ok(p) => p,
                Err(e) => {
                    eprintln!("error: {e}");
                    return 3;
                }
            };
            let results: Vec<Result<Outcome, CliError>> =
                pool.install(|| scenarios.par_iter().map(|p| load_and(p, |s| run_scenario(s, &opts))).collect());
            results.into_iter().map(report).max().unwrap_or(0)
        }
        Command::Audit { scenario, grid_n, out } => {
            let seed = match env_seed() {
                Ok(s) => s,
                Err(e) => return report(Err(e)),
            };
            let opts = RunOptions { grid_n, out, seed };
            report(load_and(&scenario, |s| run_audits(s, &opts)))
        }
        Command::Sweep {
            scenario,
            levels,
            grid_n,
            out,
        } => {
            let opts = RunOptions {
                grid_n,
                out,
                seed: None,
            };
            report(load_and(&scenario, |s| {
                let levels = levels
                    .or_else(|| s.m_list.clone())
                    .ok_or_else(|| CliError::Config("no levels: pass --M or set M_list".into()))?;
                run_sweep(s, &levels, &opts)
            }))
        }
        Command::DumpConfig { name } => match builtin(&name) {
            Some(s) => {
                print!("{}", s.to_toml());
                0
            }
            None => {
                eprintln!("error: unknown scenario {name:?}; known: {}", BUILTIN.join(", "));
                1
            }
        },
        Command::BarrierFigure { b, level, out } => {
            let dual = match make_log_barrier(b) {
                Ok(spec) => conjugate(spec),
                Err(e) => return report(Err(CliError::Config(e.to_string()))),
            };
            match emit_barrier_figure(&dual, level, &out) {
                Ok((csv, svg)) => {
                    println!("wrote {} and {}", csv.display(), svg.display());
                    0
                }
                Err(e) => report(Err(e)),
            }
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let code = run(Cli::parse());
    ExitCode::from(code as u8)
}
