mod common;

use barrier_lqr::shooting::{solve_tpbvp, ShootingConfig};
use barrier_lqr::verify::{
    direct_value_oracle, duality_audit, m_sweep, saddle_audit, saddle_scaling, sweep_offset, DualityGridSpec, SaddleSpec,
    TranscriptionSpec,
};
use common::{case1, case_start, scalar};

#[test]
fn oracle_brackets_scalar_shooting_value() {
    let (p, x) = scalar();
    let grid = p.grid(1000).unwrap();
    let r = solve_tpbvp(&p, &x, &ShootingConfig::default(), &grid).unwrap();
    assert!(r.converged);
    let o = direct_value_oracle(&p, &x, &TranscriptionSpec::default(), Some((&r.control, &grid))).unwrap();
    let gap = o.value - r.value;
    assert!(gap >= -1e-6, "oracle {} below shooting {}", o.value, r.value);
    assert!(gap.abs() <= 0.02 * r.value.abs());
}

#[test]
fn saddle_margins_on_case1() {
    let p = case1();
    let x = case_start();
    let grid = p.grid(2000).unwrap();
    let r = solve_tpbvp(&p, &x, &ShootingConfig::default(), &grid).unwrap();
    let spec = SaddleSpec::default();
    let report = saddle_audit(&p, &x, &r, &spec).unwrap();
    assert_eq!(report.alpha_margins.len(), spec.trials);
    assert!(report.worst_alpha_margin() >= -1e-6);
    assert!(report.worst_control_margin() >= -1e-6);
    assert_eq!(report.base_value, r.value);

    let scaling = saddle_scaling(&p, &x, &r, &[0.0, 0.1, 0.05, 0.025], 10, 3).unwrap();
    assert_eq!(scaling[0].1, 0.0);
    assert_eq!(scaling[0].2, 0.0);
    // control margins are quadratic in the amplitude
    for w in scaling[1..].windows(2) {
        assert!(w[1].2 < w[0].2);
        assert!(w[1].2 > 0.0);
    }
}

#[test]
fn sweep_levels_up_to_fifty() {
    let p = case1();
    let x = case_start();
    let grid = p.grid(1000).unwrap();
    let report = m_sweep(&p, &x, &[5.0, 10.0, 25.0, 50.0], &ShootingConfig::default(), &grid, None).unwrap();
    assert_eq!(report.offset, sweep_offset(&p));
    assert!(report.all_converged());
    assert!(report.values_nondecreasing(1e-4));
    assert!(report.measures_nonincreasing(1.0));
    assert!(report.beta_strictly_decreasing());
    assert_eq!(report.table().rows.len(), 4);
}

#[test]
fn sweep_rejects_bad_level_lists() {
    let p = case1();
    let x = case_start();
    let grid = p.grid(100).unwrap();
    let cfg = ShootingConfig::default();
    assert!(m_sweep(&p, &x, &[], &cfg, &grid, None).is_err());
    assert!(m_sweep(&p, &x, &[10.0, 5.0], &cfg, &grid, None).is_err());
    assert!(m_sweep(&p, &x, &[5.0], &cfg, &grid, Some(p.dual().phi0())).is_err());
}

#[test]
fn duality_report_passes_on_default_grid() {
    let p = case1();
    let report = duality_audit(p.dual(), &[0.0, 5.0, 50.0], &DualityGridSpec::default()).unwrap();
    assert!(report.all_passed(), "{report}");
    assert!(report.find("conjugate_round_trip", None).is_some());
    assert!(report.find("truncated_sup_of_quadratics", Some(50.0)).is_some());
}
