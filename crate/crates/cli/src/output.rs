use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use barrier_lqr::lti::{ControlSignal, Schedule, Trajectory};
use barrier_lqr::verify::{fmt_num, Table};

use crate::CliError;

/// One row of `summary.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub name: String,
    pub mode: String,
    pub value: f64,
    pub residual: f64,
    pub max_alpha: f64,
    pub violation_measure: f64,
    pub iterations: usize,
    pub max_state_norm: f64,
    pub terminal_error: f64,
    pub converged: bool,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

pub fn write_table(path: &Path, table: &Table) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    w.write_record(&table.header).map_err(|e| io_err(path, e))?;
    for row in &table.rows {
        w.write_record(row).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Columns `s, xi_1.., norm, u_1.., alpha`.
pub fn trajectory_table(traj: &Trajectory, control: &ControlSignal, alpha: &Schedule) -> Table {
    let n = traj.states[0].len();
    let m = control.samples[0].len();
    let mut header = vec!["s".to_string()];
    header.extend((1..=n).map(|i| format!("xi_{i}")));
    header.push("norm_xi".into());
    header.extend((1..=m).map(|i| format!("u_{i}")));
    header.push("alpha".into());
    let rows = traj
        .grid
        .times()
        .enumerate()
        .map(|(k, s)| {
            let mut row = vec![fmt_num(s)];
            row.extend(traj.states[k].iter().map(|v| fmt_num(*v)));
            row.push(fmt_num(traj.states[k].norm()));
            row.extend(control.samples[k].iter().map(|v| fmt_num(*v)));
            row.push(fmt_num(alpha.values[k]));
            row
        })
        .collect();
    Table { header, rows }
}

pub fn summary_table(rows: &[Summary]) -> Table {
    let header = [
        "name",
        "mode",
        "value",
        "residual",
        "max_alpha",
        "violation_measure",
        "iterations",
        "max_state_norm",
        "terminal_error",
        "converged",
    ];
    Table {
        header: header.iter().map(|h| h.to_string()).collect(),
        rows: rows
            .iter()
            .map(|s| {
                vec![
                    s.name.clone(),
                    s.mode.clone(),
                    fmt_num(s.value),
                    fmt_num(s.residual),
                    fmt_num(s.max_alpha),
                    fmt_num(s.violation_measure),
                    s.iterations.to_string(),
                    fmt_num(s.max_state_norm),
                    fmt_num(s.terminal_error),
                    s.converged.to_string(),
                ]
            })
            .collect(),
    }
}

/// Maps data coordinates to a fixed pixel frame.
pub struct Frame {
    pub x: (f64, f64),
    pub y: (f64, f64),
    pub width: f64,
    pub height: f64,
    pub pad: f64,
}

impl Frame {
    pub fn px(&self, x: f64) -> f64 {
        self.pad + (x - self.x.0) / (self.x.1 - self.x.0) * (self.width - 2.0 * self.pad)
    }

    pub fn py(&self, y: f64) -> f64 {
        self.height - self.pad - (y - self.y.0) / (self.y.1 - self.y.0) * (self.height - 2.0 * self.pad)
    }

    pub fn open(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#,
            w = self.width,
            h = self.height
        );
        let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let (x0, x1, y0, y1) = (self.px(self.x.0), self.px(self.x.1), self.py(self.y.0), self.py(self.y.1));
        let _ = writeln!(
            s,
            r#"<rect x="{x0:.2}" y="{y1:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#,
            x1 - x0,
            y0 - y1
        );
        for (v, anchor) in [(self.x.0, "start"), (self.x.1, "end")] {
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="{anchor}">{}</text>"#,
                self.px(v),
                y0 + 14.0,
                tick(v)
            );
        }
        for v in [self.y.0, self.y.1] {
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="end">{}</text>"#,
                x0 - 4.0,
                self.py(v) + 4.0,
                tick(v)
            );
        }
        s
    }

    /// Polyline through the finite points inside the y range; breaks at gaps.
    pub fn polyline(&self, pts: impl IntoIterator<Item = (f64, f64)>, style: &str) -> String {
        let mut out = String::new();
        let mut seg: Vec<String> = Vec::new();
        let flush = |seg: &mut Vec<String>, out: &mut String| {
            if seg.len() > 1 {
                let _ = writeln!(out, r#"<polyline fill="none" {style} points="{}"/>"#, seg.join(" "));
            }
            seg.clear();
        };
        for (x, y) in pts {
            if x.is_finite() && y.is_finite() && y >= self.y.0 && y <= self.y.1 {
                seg.push(format!("{:.2},{:.2}", self.px(x), self.py(y)));
            } else {
                flush(&mut seg, &mut out);
            }
        }
        flush(&mut seg, &mut out);
        out
    }
}

fn tick(v: f64) -> String {
    let s = format!("{v:.2}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

/// Phase portrait of the first two state components with the constraint circle.
pub fn phase_plot(trajectories: &[(&str, &Trajectory)], radius: f64) -> String {
    let mut lim = radius * 1.1;
    for (_, t) in trajectories {
        for x in &t.states {
            for v in x.iter().take(2) {
                lim = lim.max(v.abs() * 1.05);
            }
        }
    }
    let frame = Frame {
        x: (-lim, lim),
        y: (-lim, lim),
        width: 480.0,
        height: 480.0,
        pad: 40.0,
    };
    let mut s = frame.open();
    let scale = (frame.px(radius) - frame.px(0.0)).abs();
    let _ = writeln!(
        s,
        r#"<circle cx="{:.2}" cy="{:.2}" r="{scale:.2}" fill="none" stroke="red" stroke-dasharray="4 3"/>"#,
        frame.px(0.0),
        frame.py(0.0)
    );
    const COLORS: [&str; 6] = ["#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"];
    for (i, (label, t)) in trajectories.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let second = |x: &nalgebra::DVector<f64>| if x.len() > 1 { x[1] } else { 0.0 };
        s.push_str(&frame.polyline(
            t.states.iter().map(|x| (x[0], second(x))),
            &format!(r#"stroke="{color}" stroke-width="1.5""#),
        ));
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-size="12" fill="{color}">{label}</text>"#,
            frame.pad + 6.0,
            frame.pad + 16.0 * (i + 1) as f64
        );
    }
    s.push_str("</svg>\n");
    s
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| io_err(path, e))
}
