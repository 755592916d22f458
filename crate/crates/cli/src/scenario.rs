use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use barrier_lqr::barrier::{conjugate, make_log_barrier};
use barrier_lqr::lti::{Plant, Problem};
use barrier_lqr::shooting::ShootingConfig;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Constrained,
    UnconstrainedReference,
    MSweep,
    Audits,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Constrained => "constrained",
            Mode::UnconstrainedReference => "unconstrained_reference",
            Mode::MSweep => "m_sweep",
            Mode::Audits => "audits",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BarrierKind {
    Log,
}

/// Plant matrices as row-major lists with explicit dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantSection {
    pub n: usize,
    pub m: usize,
    #[serde(rename = "A")]
    pub a: Vec<f64>,
    #[serde(rename = "B")]
    pub b: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostSection {
    pub horizon: f64,
    #[serde(rename = "K")]
    pub k: f64,
    pub kappa: f64,
    #[serde(rename = "P_t")]
    pub p_t: Vec<f64>,
    pub z: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BarrierSection {
    pub kind: BarrierKind,
    pub b: f64,
    #[serde(rename = "M")]
    pub m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub max_iters: usize,
    pub simplex_init_radius: f64,
    pub residual_tol: f64,
    pub restart_count: usize,
    pub fixed_point_damping: f64,
    pub simplex_tol: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        let c = ShootingConfig::default();
        SolverSection {
            max_iters: c.max_iters,
            simplex_init_radius: c.simplex_init_radius,
            residual_tol: c.residual_tol,
            restart_count: c.restart_count,
            fixed_point_damping: c.fixed_point_damping,
            simplex_tol: c.simplex_tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub mode: Mode,
    #[serde(rename = "grid_N")]
    pub grid_n: usize,
    pub initial_state: Vec<f64>,
    #[serde(rename = "M_list", default, skip_serializing_if = "Option::is_none")]
    pub m_list: Option<Vec<f64>>,
    pub output_dir: PathBuf,
    pub plant: PlantSection,
    pub cost: CostSection,
    pub barrier: BarrierSection,
    #[serde(default)]
    pub solver: SolverSection,
}

fn matrix(name: &str, rows: usize, cols: usize, data: &[f64]) -> Result<DMatrix<f64>, CliError> {
    if data.len() != rows * cols {
        return Err(CliError::Config(format!(
            "{name} has {} entries, expected {rows}x{cols} = {}",
            data.len(),
            rows * cols
        )));
    }
    Ok(DMatrix::from_row_slice(rows, cols, data))
}

fn vector(name: &str, len: usize, data: &[f64]) -> Result<DVector<f64>, CliError> {
    if data.len() != len {
        return Err(CliError::Config(format!("{name} has {} entries, expected {len}", data.len())));
    }
    Ok(DVector::from_column_slice(data))
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let s: Scenario = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Scenario::parse(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    /// Rebuilds every derived object so that invalid data is reported on load.
    pub fn validate(&self) -> Result<(), CliError> {
        self.problem()?;
        self.initial()?;
        self.shooting_config()?;
        if self.grid_n == 0 {
            return Err(CliError::Config("grid_N must be positive".into()));
        }
        if let Some(list) = &self.m_list {
            if list.is_empty() || list.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(CliError::Config("M_list must be nonempty and strictly increasing".into()));
            }
            let dual = conjugate(make_log_barrier(self.barrier.b).map_err(CliError::from_config)?);
            for &m in list {
                dual.truncate(m).map_err(CliError::from_config)?;
            }
        } else if self.mode == Mode::MSweep {
            return Err(CliError::Config("mode m_sweep needs M_list".into()));
        }
        Ok(())
    }

    pub fn problem(&self) -> Result<Problem, CliError> {
        let (n, m) = (self.plant.n, self.plant.m);
        if n == 0 || m == 0 {
            return Err(CliError::Config("plant dimensions must be positive".into()));
        }
        let plant = Plant::new(matrix("A", n, n, &self.plant.a)?, matrix("B", n, m, &self.plant.b)?)
            .map_err(CliError::from_config)?;
        let dual = match self.barrier.kind {
            BarrierKind::Log => conjugate(make_log_barrier(self.barrier.b).map_err(CliError::from_config)?),
        };
        Problem::new(
            plant,
            self.cost.horizon,
            self.cost.k,
            self.cost.kappa,
            matrix("P_t", n, n, &self.cost.p_t)?,
            vector("z", n, &self.cost.z)?,
            dual,
            self.barrier.m,
        )
        .map_err(CliError::from_config)
    }

    pub fn initial(&self) -> Result<DVector<f64>, CliError> {
        vector("initial_state", self.plant.n, &self.initial_state)
    }

    pub fn shooting_config(&self) -> Result<ShootingConfig, CliError> {
        let s = &self.solver;
        let c = ShootingConfig {
            max_iters: s.max_iters,
            simplex_init_radius: s.simplex_init_radius,
            residual_tol: s.residual_tol,
            restart_count: s.restart_count,
            fixed_point_damping: s.fixed_point_damping,
            simplex_tol: s.simplex_tol,
        };
        c.validate().map_err(CliError::from_config)?;
        Ok(c)
    }
}

/// Names accepted by `dump-config`.
pub const BUILTIN: [&str; 4] = ["case1_constrained", "case1_unconstrained", "case2", "case1_sweep"];

pub fn builtin(name: &str) -> Option<Scenario> {
    let case1 = Scenario {
        name: "case1_constrained".into(),
        mode: Mode::Constrained,
        grid_n: 2000,
        initial_state: vec![1.6, -1.6],
        m_list: None,
        output_dir: PathBuf::from("out/case1_constrained"),
        plant: PlantSection {
            n: 2,
            m: 1,
            a: vec![-1.0, 2.0, -1.0, 1.0],
            b: vec![1.0, 0.0],
        },
        cost: CostSection {
            horizon: 4.0,
            k: 0.1,
            kappa: 1.0,
            p_t: vec![1.0, 0.0, 0.0, 1.0],
            z: vec![0.0, 0.0],
        },
        barrier: BarrierSection {
            kind: BarrierKind::Log,
            b: 3.0,
            m: 50.0,
        },
        solver: SolverSection::default(),
    };
    match name {
        "case1_constrained" => Some(case1),
        "case1_unconstrained" => Some(Scenario {
            name: name.into(),
            mode: Mode::UnconstrainedReference,
            output_dir: PathBuf::from("out/case1_unconstrained"),
            ..case1
        }),
        "case2" => Some(Scenario {
            name: name.into(),
            output_dir: PathBuf::from("out/case2"),
            cost: CostSection {
                p_t: vec![10.0, 0.0, 0.0, 10.0],
                z: vec![1.0, 1.0],
                ..case1.cost
            },
            ..case1
        }),
        "case1_sweep" => Some(Scenario {
            name: name.into(),
            mode: Mode::MSweep,
            m_list: Some(vec![5.0, 10.0, 25.0, 50.0, 100.0]),
            output_dir: PathBuf::from("out/case1_sweep"),
            ..case1
        }),
        _ => None,
    }
}
