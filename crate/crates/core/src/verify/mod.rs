//! Brute-force cross-checks of the solvers: a direct transcription value
//! oracle, a sweep over truncation levels, saddle-point perturbation audits
//! and grid checks of the conjugate-pair identities.

mod duality;
mod oracle;
mod saddle;
mod sweep;

pub use duality::{duality_audit, DualityCheck, DualityGridSpec, DualityReport};
pub use oracle::{direct_value_oracle, OracleResult, TranscriptionSpec};
pub use saddle::{saddle_audit, saddle_scaling, SaddleReport, SaddleSpec};
pub use sweep::{m_sweep, sweep_offset, MSweepReport};

/// A header plus rows of formatted cells, ready for CSV output.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub(crate) fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }
}

/// Fixed 12-significant-digit formatting used in all tabular output.
pub fn fmt_num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.11e}")
    } else if v.is_nan() {
        "nan".to_string()
    } else if v > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}
