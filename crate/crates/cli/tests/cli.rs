use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use barrier_lqr::barrier::{conjugate, make_log_barrier};
use barrier_lqr_cli::figure::{barrier_table, emit_barrier_figure, sample_levels};
use barrier_lqr_cli::{builtin, Scenario, BUILTIN};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_barrier-lqr"))
}

fn scenarios_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}

const SCALAR: &str = r#"
name = "scalar"
mode = "constrained"
grid_N = 400
initial_state = [0.5]
output_dir = "unused"

[plant]
n = 1
m = 1
A = [0.0]
B = [1.0]

[cost]
horizon = 1.0
K = 0.0
kappa = 1.0
P_t = [1.0]
z = [0.0]

[barrier]
kind = "log"
b = 3.0
M = 50.0
"#;

fn write_scenario(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let mut rows = vec![r.headers().unwrap().iter().map(String::from).collect()];
    rows.extend(r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()));
    rows
}

fn column(rows: &[Vec<String>], name: &str) -> Vec<String> {
    let k = rows[0].iter().position(|h| h == name).unwrap();
    rows[1..].iter().map(|r| r[k].clone()).collect()
}

fn num(s: &str) -> f64 {
    s.parse().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn dumped_configs_round_trip() {
    for name in BUILTIN {
        let s = builtin(name).unwrap();
        let text = s.to_toml();
        assert_eq!(Scenario::parse(&text).unwrap(), s);
        let out = bin().args(["dump-config", name]).output().unwrap();
        assert_eq!(code(&out), 0);
        assert_eq!(String::from_utf8(out.stdout).unwrap(), text);
        let bundled = fs::read_to_string(scenarios_dir().join(format!("{name}.toml"))).unwrap();
        assert_eq!(Scenario::parse(&bundled).unwrap(), s);
    }
    let out = bin().args(["dump-config", "nope"]).output().unwrap();
    assert_eq!(code(&out), 1);
}

#[test]
fn unknown_keys_and_bad_data_are_config_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let extra = SCALAR.replace("kappa = 1.0", "kappa = 1.0\nkapa = 2.0");
    let err = Scenario::parse(&extra).unwrap_err().to_string();
    assert!(err.contains("kapa") && err.contains("line"), "{err}");

    let cases = [
        extra,
        SCALAR.replace("A = [0.0]", "A = [0.0, 1.0]"),
        SCALAR.replace("K = 0.0", "K = -1.0"),
        SCALAR.replace("initial_state = [0.5]", "initial_state = [0.5, 0.1]"),
        SCALAR.replace("kind = \"log\"", "kind = \"quartic\""),
        SCALAR.replace("M = 50.0", "M = -2.0"),
        SCALAR.replace("mode = \"constrained\"", "mode = \"m_sweep\""),
        SCALAR.replace("grid_N = 400", "grid_N = 0"),
    ];
    for (i, text) in cases.iter().enumerate() {
        assert!(Scenario::parse(text).is_err(), "case {i} parsed");
        let p = write_scenario(tmp.path(), &format!("bad{i}.toml"), text);
        let out = bin().arg("solve").arg(&p).arg("--out").arg(tmp.path()).output().unwrap();
        assert_eq!(code(&out), 1, "case {i}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(String::from_utf8_lossy(&out.stderr).contains("config error"));
    }
    let out = bin().args(["solve", "/nonexistent/scenario.toml"]).output().unwrap();
    assert_eq!(code(&out), 1);
}

#[test]
fn solve_writes_stable_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let p = write_scenario(tmp.path(), "scalar.toml", SCALAR);
    let mut bytes = Vec::new();
    for run in ["a", "b"] {
        let out_dir = tmp.path().join(run);
        let out = bin().arg("solve").arg(&p).arg("--out").arg(&out_dir).output().unwrap();
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        let dir = out_dir.join("scalar");
        let files: Vec<Vec<u8>> = ["trajectory.csv", "summary.csv", "phase.svg"]
            .iter()
            .map(|f| fs::read(dir.join(f)).unwrap())
            .collect();
        bytes.push(files);
    }
    assert_eq!(bytes[0], bytes[1]);

    let traj = read_csv(&tmp.path().join("a/scalar/trajectory.csv"));
    assert_eq!(traj[0], ["s", "xi_1", "norm_xi", "u_1", "alpha"]);
    assert_eq!(traj.len(), 402);
    // fixed formatting with 12 significant digits
    assert_eq!(traj[1][0], "0.00000000000e0");
    assert!(traj[1..].iter().all(|r| r[1].split('e').next().unwrap().trim_start_matches('-').len() == 13));
    let summary = read_csv(&tmp.path().join("a/scalar/summary.csv"));
    assert_eq!(
        summary[0],
        ["name", "mode", "value", "residual", "max_alpha", "violation_measure", "iterations", "max_state_norm", "terminal_error", "converged"]
    );
    assert_eq!(summary[1][9], "true");
    assert!(num(&summary[1][3]) <= 1e-6);
    let svg = fs::read_to_string(tmp.path().join("a/scalar/phase.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("<circle") && svg.trim_end().ends_with("</svg>"));
}

#[test]
fn grid_override_and_parallel_batch() {
    let tmp = tempfile::tempdir().unwrap();
    let a = write_scenario(tmp.path(), "a.toml", &SCALAR.replace("name = \"scalar\"", "name = \"first\""));
    let b = write_scenario(
        tmp.path(),
        "b.toml",
        &SCALAR.replace("name = \"scalar\"", "name = \"second\"").replace("initial_state = [0.5]", "initial_state = [-1.0]"),
    );
    let out = bin()
        .arg("solve")
        .args([&a, &b])
        .args(["--jobs", "2", "--grid-N", "100", "--out"])
        .arg(tmp.path())
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["first", "second"] {
        let traj = read_csv(&tmp.path().join(name).join("trajectory.csv"));
        assert_eq!(traj.len(), 102);
    }
    let stdout = String::from_utf8(out.stdout).unwrap();
    let first = stdout.find("first:").unwrap();
    let second = stdout.find("second:").unwrap();
    assert!(first < second);
}

#[test]
fn non_convergence_exits_two_with_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let text = format!("{SCALAR}\n[solver]\nmax_iters = 1\nrestart_count = 0\n");
    let p = write_scenario(tmp.path(), "short.toml", &text);
    let out = bin().arg("solve").arg(&p).arg("--out").arg(tmp.path()).output().unwrap();
    assert_eq!(code(&out), 2);
    let summary = read_csv(&tmp.path().join("scalar/summary.csv"));
    assert_eq!(summary[1][9], "false");
    assert!(tmp.path().join("scalar/trajectory.csv").exists());
}

#[test]
fn audit_honours_seed_variable() {
    let tmp = tempfile::tempdir().unwrap();
    let p = write_scenario(tmp.path(), "scalar.toml", SCALAR);
    let run = |seed: &str, dir: &str| {
        let out = bin()
            .arg("audit")
            .arg(&p)
            .arg("--out")
            .arg(tmp.path().join(dir))
            .env("BARRIER_LQR_SEED", seed)
            .output()
            .unwrap();
        (code(&out), String::from_utf8_lossy(&out.stderr).to_string())
    };
    assert_eq!(run("7", "s7").0, 0);
    assert_eq!(run("7", "s7b").0, 0);
    assert_eq!(run("8", "s8").0, 0);
    let saddle = |d: &str| fs::read(tmp.path().join(d).join("scalar/saddle.csv")).unwrap();
    assert_eq!(saddle("s7"), saddle("s7b"));
    assert_ne!(saddle("s7"), saddle("s8"));
    for f in ["duality.csv", "oracle.csv", "trajectory.csv", "summary.csv"] {
        assert!(tmp.path().join("s7/scalar").join(f).exists(), "{f}");
    }
    let oracle = read_csv(&tmp.path().join("s7/scalar/oracle.csv"));
    assert!(num(&oracle[1][2]) >= -1e-6);
    assert!(num(&oracle[1][3]) <= 0.02);
    let margins = read_csv(&tmp.path().join("s7/scalar/saddle.csv"));
    assert_eq!(margins.len(), 101);
    assert!(margins[1..].iter().all(|r| num(&r[1]) >= -1e-6 && num(&r[2]) >= -1e-6));
    assert_eq!(run("seven", "bad").0, 1);
}

#[test]
fn sweep_subcommand_writes_table() {
    let tmp = tempfile::tempdir().unwrap();
    let p = write_scenario(tmp.path(), "scalar.toml", SCALAR);
    let out = bin()
        .arg("sweep")
        .arg(&p)
        .args(["--M", "1,5,10", "--out"])
        .arg(tmp.path())
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let rows = read_csv(&tmp.path().join("scalar/sweep.csv"));
    assert_eq!(rows.len(), 4);
    let values: Vec<f64> = column(&rows, "value").iter().map(|v| num(v)).collect();
    assert!(values.windows(2).all(|w| w[1] >= w[0] - 1e-4));
    let out = bin().arg("sweep").arg(&p).arg("--out").arg(tmp.path()).output().unwrap();
    assert_eq!(code(&out), 1);
}

#[test]
fn barrier_figure_envelope() {
    let dual = conjugate(make_log_barrier(3.0).unwrap());
    let table = barrier_table(&dual, 50.0, 301).unwrap();
    assert_eq!(table.header.len(), 11);
    let tangents: Vec<f64> = sample_levels(&dual, 50.0)
        .unwrap()
        .iter()
        .map(|(_, w)| dual.spec().dphi_inv(*w).unwrap())
        .collect();
    for row in &table.rows {
        let phi = num(&row[1]);
        for q in &row[3..] {
            assert!(num(q) <= phi + 1e-9 * phi.abs().max(1.0));
        }
        assert!(num(&row[2]) <= phi + 1e-9 * phi.abs().max(1.0));
    }
    for ((alpha, w), rho) in sample_levels(&dual, 50.0).unwrap().iter().zip(&tangents) {
        let phi = dual.spec().phi(*rho);
        assert!((w * rho - alpha - phi).abs() <= 1e-8 * phi.max(1.0));
    }

    // lowest admissible level: a single tangent line at the origin
    let low = dual.alpha_min();
    let flat = barrier_table(&dual, low, 101).unwrap();
    for row in &flat.rows {
        let rho = num(&row[0]).powi(2);
        let line = dual.phi0() + dual.slope0() * rho;
        assert!((num(&row[2]) - line).abs() <= 1e-9 * line.abs().max(1.0));
        for q in &row[3..] {
            assert!((num(q) - line).abs() <= 1e-9 * line.abs().max(1.0));
        }
    }

    let high = barrier_table(&dual, 1e3, 301).unwrap();
    for (h, l) in high.rows.iter().zip(&table.rows) {
        assert!(num(&h[2]) >= num(&l[2]) - 1e-12);
    }

    let tmp = tempfile::tempdir().unwrap();
    let (csv_path, svg_path) = emit_barrier_figure(&dual, 50.0, tmp.path()).unwrap();
    assert!(csv_path.exists() && svg_path.exists());
    let out = bin()
        .args(["barrier-figure", "--M", "50", "--out"])
        .arg(tmp.path().join("fig"))
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
    assert_eq!(fs::read(tmp.path().join("fig/barrier_figure.csv")).unwrap(), fs::read(&csv_path).unwrap());
    let blocker = tmp.path().join("file");
    fs::write(&blocker, "x").unwrap();
    assert!(emit_barrier_figure(&dual, 50.0, &blocker.join("sub")).is_err());
}

fn run_bundled(name: &str, tmp: &Path) -> Vec<Vec<String>> {
    let out = bin()
        .arg("solve")
        .arg(scenarios_dir().join(format!("{name}.toml")))
        .arg("--out")
        .arg(tmp)
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    read_csv(&tmp.join(name).join("summary.csv"))
}

#[test]
fn bundled_case1_unconstrained_saturates() {
    let tmp = tempfile::tempdir().unwrap();
    let summary = run_bundled("case1_unconstrained", tmp.path());
    assert_eq!(num(&column(&summary, "max_alpha")[0]), 50.0);
    let traj = read_csv(&tmp.path().join("case1_unconstrained/trajectory.csv"));
    let saturated = column(&traj, "alpha").iter().filter(|a| num(a) == 50.0).count();
    assert!(saturated > 1);
}

#[test]
fn bundled_case1_constrained_matches_reported_peak() {
    let tmp = tempfile::tempdir().unwrap();
    let summary = run_bundled("case1_constrained", tmp.path());
    let max_alpha = num(&column(&summary, "max_alpha")[0]);
    let max_norm = num(&column(&summary, "max_state_norm")[0]);
    assert!((30.0..=40.0).contains(&max_alpha), "max alpha {max_alpha}");
    assert!(max_norm < 3.0, "max |xi| {max_norm}");
}

#[test]
fn bundled_case2_reaches_target_inside_ball() {
    let tmp = tempfile::tempdir().unwrap();
    let summary = run_bundled("case2", tmp.path());
    assert!(num(&column(&summary, "terminal_error")[0]) < 0.5);
    let max_norm = num(&column(&summary, "max_state_norm")[0]);
    assert!(max_norm <= 3.0, "max |xi| {max_norm}");
}
