use barrier_lqr::barrier::{conjugate, make_log_barrier, DualBarrier};
use barrier_lqr::lti::{cost_truncated, game_cost, simulate, ControlSignal, Grid, Plant, Problem, Schedule};
use barrier_lqr::ExtReal;
use nalgebra::{dmatrix, dvector, DMatrix, DVector};
use proptest::prelude::*;

fn dual(b: f64) -> DualBarrier {
    conjugate(make_log_barrier(b).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn conjugate_round_trip(b in 0.5f64..10.0, t in 0.0f64..1.0) {
        let d = dual(b);
        let beta = d.slope0() * (1.0 + 1e4 * t * t);
        let alpha = d.a(beta).unwrap();
        let back = d.a_inv(alpha).unwrap();
        prop_assert!((back - beta).abs() <= 1e-8 * beta.max(1.0));
        let lam = d.a_inv_lambert(alpha).unwrap();
        prop_assert!((lam - beta).abs() <= 1e-8 * beta.max(1.0));
    }

    #[test]
    fn quadratics_minorize_the_barrier(b in 0.5f64..10.0, r in 0.0f64..0.999, alpha in 0.0f64..1e3) {
        let d = dual(b);
        let rho = r * d.spec().b_squared();
        let phi = d.spec().phi(rho);
        prop_assert!(d.gamma(rho, alpha).unwrap() <= phi + 1e-9 * phi.abs().max(1.0));
        if let ExtReal::Finite(best) = d.maximizer_alpha_exact(rho) {
            let touch = d.gamma(rho, best).unwrap();
            prop_assert!((touch - phi).abs() <= 1e-8 * phi.abs().max(1.0));
        }
    }

    #[test]
    fn truncation_is_monotone_in_level(b in 0.5f64..5.0, r in 0.0f64..2.0, m1 in 0.0f64..100.0, dm in 0.0f64..100.0) {
        let d = dual(b);
        let rho = r * d.spec().b_squared();
        let lo = d.truncate(m1).unwrap().value_nonneg(rho);
        let hi = d.truncate(m1 + dm).unwrap().value_nonneg(rho);
        prop_assert!(lo <= hi + 1e-9 * hi.abs().max(1.0));
        match d.barrier_value(rho) {
            ExtReal::Finite(full) => prop_assert!(hi <= full + 1e-9 * full.abs().max(1.0)),
            ExtReal::PosInf => prop_assert!(rho >= d.spec().b_squared()),
        }
    }

    #[test]
    fn truncation_is_convex(b in 0.5f64..5.0, m in 0.0f64..80.0, r1 in 0.0f64..2.0, r2 in 0.0f64..2.0) {
        let d = dual(b);
        let t = d.truncate(m).unwrap();
        let (x, y) = (r1 * d.spec().b_squared(), r2 * d.spec().b_squared());
        let mid = t.value_nonneg(0.5 * (x + y));
        let chord = 0.5 * (t.value_nonneg(x) + t.value_nonneg(y));
        prop_assert!(mid <= chord + 1e-9 * chord.abs().max(1.0));
    }

    #[test]
    fn selected_weight_is_inverse_of_selected_level(b in 0.5f64..5.0, m in 0.1f64..80.0, r in 0.0f64..1.5) {
        let d = dual(b);
        let t = d.truncate(m).unwrap();
        let rho = r * d.spec().b_squared();
        let alpha = t.alpha_star(rho);
        prop_assert!(alpha <= m && alpha >= d.alpha_min());
        let w = d.a_inv(alpha).unwrap();
        prop_assert!((w - t.weight(rho)).abs() <= 1e-9 * w.max(1.0));
        // the selected quadratic attains the truncated barrier
        let q = w * rho - alpha;
        let v = t.value_nonneg(rho);
        prop_assert!((q - v).abs() <= 1e-8 * v.abs().max(1.0));
    }

    #[test]
    fn barrier_inequalities(b in 0.5f64..5.0, m in 0.0f64..80.0, r in 0.0f64..3.0, s in 0.0f64..1.0) {
        let d = dual(b);
        let b2 = d.spec().b_squared();
        let t = d.truncate(m).unwrap();
        let rho = r * b2;
        if rho < b2 {
            prop_assert!(d.phi0() + d.slope0() * rho - d.spec().phi(rho) <= 1e-10);
        }
        let beyond = t.rho_switch() + rho;
        prop_assert!(d.phi0() + d.slope0() * beyond - t.beta_cap() * beyond + m <= 1e-10 * m.max(1.0));
        let below = d.slope0() * s;
        prop_assert!(d.lambda_plus(m, below).unwrap() <= 1e-10 * m.max(1.0));
        let between = d.slope0() + s * (t.beta_cap() - d.slope0());
        let gap = d.lambda_plus(m, between).unwrap() - d.a(between).unwrap() - d.phi0();
        prop_assert!(gap <= 1e-10 * m.max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn simulation_is_linear(x1 in prop::array::uniform2(-2.0f64..2.0), x2 in prop::array::uniform2(-2.0f64..2.0),
                            c1 in -1.0f64..1.0, c2 in -1.0f64..1.0) {
        let plant = Plant::new(dmatrix![-1.0, 2.0; -1.0, 1.0], dmatrix![1.0; 0.0]).unwrap();
        let grid = Grid::new(2.0, 200).unwrap();
        let u1 = ControlSignal::from_fn(&grid, |s| dvector![c1 * s.sin()]);
        let u2 = ControlSignal::from_fn(&grid, |s| dvector![c2 * s]);
        let (x1, x2) = (DVector::from_row_slice(&x1), DVector::from_row_slice(&x2));
        let a = simulate(&plant, &x1, &u1, &grid).unwrap();
        let b = simulate(&plant, &x2, &u2, &grid).unwrap();
        let sum = simulate(&plant, &(&x1 + &x2), &(&u1 + &u2), &grid).unwrap();
        for k in 0..grid.nodes() {
            prop_assert!((&a.states[k] + &b.states[k] - &sum.states[k]).amax() <= 1e-12);
        }
    }

    #[test]
    fn any_schedule_lower_bounds_the_truncated_cost(c in -2.0f64..2.0, level in 0.0f64..50.0, m in 1.0f64..100.0) {
        let plant = Plant::new(dmatrix![-1.0, 2.0; -1.0, 1.0], dmatrix![1.0; 0.0]).unwrap();
        let p = Problem::new(plant, 4.0, 0.1, 1.0, DMatrix::identity(2, 2), dvector![0.0, 0.0], dual(3.0), m).unwrap();
        let grid = p.grid(400).unwrap();
        let x = dvector![1.6, -1.6];
        let u = ControlSignal::from_fn(&grid, |s| dvector![c * (1.0 - s / 4.0)]);
        let upper = cost_truncated(&p, &x, &u, &grid).unwrap();
        let alpha = Schedule::constant(level.min(m), &grid);
        let j = game_cost(&p, &x, &u, &alpha, &grid).unwrap();
        prop_assert!(j <= upper + 1e-9 * upper.abs().max(1.0));
    }
}
