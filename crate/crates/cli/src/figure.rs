use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use barrier_lqr::barrier::DualBarrier;
use barrier_lqr::verify::{fmt_num, Table};
use barrier_lqr::ExtReal;

use crate::output::{write_table, write_text, Frame};
use crate::CliError;

pub const SAMPLE_QUADRATICS: usize = 8;

/// Tangency points of the sample quadratics, spread evenly in `sqrt(rho)` over
/// the part of `[0, b^2)` where the truncation follows the barrier.
pub fn sample_levels(dual: &DualBarrier, m: f64) -> Result<Vec<(f64, f64)>, CliError> {
    let t = dual.truncate(m).map_err(CliError::from_config)?;
    let top = t.rho_switch().sqrt();
    (0..SAMPLE_QUADRATICS)
        .map(|i| {
            let r = top * i as f64 / (SAMPLE_QUADRATICS - 1) as f64;
            let alpha = t.alpha_star(r * r);
            let weight = dual.a_inv(alpha).map_err(CliError::from_config)?;
            Ok((alpha, weight))
        })
        .collect()
}

/// Columns `sqrt_rho, phi, phi_M, q_1 .. q_8` on `sqrt(rho)` in `[0, 1.5 b]`.
pub fn barrier_table(dual: &DualBarrier, m: f64, points: usize) -> Result<Table, CliError> {
    let t = dual.truncate(m).map_err(CliError::from_config)?;
    let quads = sample_levels(dual, m)?;
    let mut header: Vec<String> = ["sqrt_rho", "phi", "phi_M"].iter().map(|s| s.to_string()).collect();
    header.extend((1..=quads.len()).map(|i| format!("q_{i}")));
    let top = 1.5 * dual.spec().b();
    let rows = (0..points)
        .map(|k| {
            let r = top * k as f64 / (points - 1) as f64;
            let rho = r * r;
            let phi = match dual.barrier_value(rho) {
                ExtReal::Finite(v) => v,
                ExtReal::PosInf => f64::INFINITY,
            };
            let mut row = vec![fmt_num(r), fmt_num(phi), fmt_num(t.value_nonneg(rho))];
            row.extend(quads.iter().map(|(a, w)| fmt_num(w * rho - a)));
            row
        })
        .collect();
    Ok(Table { header, rows })
}

/// Writes `barrier_figure.csv` and `barrier_figure.svg` into `dir`.
pub fn emit_barrier_figure(dual: &DualBarrier, m: f64, dir: &Path) -> Result<(PathBuf, PathBuf), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let table = barrier_table(dual, m, 301)?;
    let csv_path = dir.join("barrier_figure.csv");
    write_table(&csv_path, &table)?;

    let parse = |s: &str| s.parse::<f64>().unwrap_or(f64::INFINITY);
    let cols: Vec<Vec<(f64, f64)>> = (1..table.header.len())
        .map(|c| table.rows.iter().map(|row| (parse(&row[0]), parse(&row[c]))).collect())
        .collect();
    let b = dual.spec().b();
    let t = dual.truncate(m).map_err(CliError::from_config)?;
    let y_top = (t.value_nonneg(dual.spec().b_squared()) * 1.2).max(dual.phi0() + 1.0);
    let frame = Frame {
        x: (0.0, 1.5 * b),
        y: (dual.phi0().min(0.0) - 0.5, y_top),
        width: 560.0,
        height: 400.0,
        pad: 40.0,
    };
    let mut svg = frame.open();
    for q in &cols[2..] {
        svg.push_str(&frame.polyline(q.iter().copied(), r##"stroke="#999999" stroke-width="0.8""##));
    }
    svg.push_str(&frame.polyline(cols[0].iter().copied(), r##"stroke="black" stroke-width="2""##));
    svg.push_str(&frame.polyline(cols[1].iter().copied(), r##"stroke="#1f77b4" stroke-width="1.5" stroke-dasharray="6 3""##));
    let _ = writeln!(
        svg,
        r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="red" stroke-dasharray="3 3"/>"#,
        frame.py(frame.y.0),
        frame.py(frame.y.1),
        x = frame.px(b)
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" font-size="12">M = {}</text>"#,
        frame.pad + 6.0,
        frame.pad + 16.0,
        m
    );
    svg.push_str("</svg>\n");
    let svg_path = dir.join("barrier_figure.svg");
    write_text(&svg_path, &svg)?;
    Ok((csv_path, svg_path))
}
