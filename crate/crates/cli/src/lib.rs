//! Scenario files, batch runs and figure output for the barrier regulator.

pub mod figure;
pub mod output;
pub mod run;
pub mod scenario;

pub use run::{run_audits, run_scenario, run_sweep, Outcome, RunOptions};
pub use scenario::{builtin, Mode, Scenario, BUILTIN};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("solver error: {0}")]
    Solver(#[from] barrier_lqr::Error),

    #[error("invariant violated: {0}")]
    Invariant(String),
}

impl CliError {
    pub(crate) fn from_config(e: barrier_lqr::Error) -> Self {
        CliError::Config(e.to_string())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 1,
            CliError::Solver(barrier_lqr::Error::InvalidParameter(_) | barrier_lqr::Error::Shape(_)) => 1,
            CliError::Solver(_) | CliError::Invariant(_) => 3,
        }
    }
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_NOT_CONVERGED: i32 = 2;
