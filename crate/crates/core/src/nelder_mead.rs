//! Derivative-free simplex minimization with the standard coefficients
//! (reflection 1, expansion 2, contraction 1/2, shrink 1/2).

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Options {
    pub max_iters: usize,
    /// Stop once the largest vertex distance from the best vertex falls below this.
    pub diameter_tol: f64,
    /// Stop once the best value falls below this.
    pub value_target: f64,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            max_iters: 2000,
            diameter_tol: 1e-9,
            value_target: f64::NEG_INFINITY,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    ValueTarget,
    SimplexCollapsed,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub termination: Termination,
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

/// Minimizes `f` from an axis-aligned simplex `x0, x0 + radius e_i`.
///
/// Non-finite objective values are treated as `+inf`.
pub fn minimize<F>(mut f: F, x0: &[f64], radius: f64, opts: &Options) -> Minimum
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    assert!(n > 0, "nelder-mead needs at least one variable");
    let mut evaluations = 0;
    let mut eval = |x: &[f64]| {
        evaluations += 1;
        let v = f(x);
        if v.is_nan() { f64::INFINITY } else { v }
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), eval(x0)));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += radius;
        let v = eval(&x);
        simplex.push((x, v));
    }

    let mut iterations = 0;
    let termination = loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        if simplex[0].1 <= opts.value_target {
            break Termination::ValueTarget;
        }
        if diameter(&simplex) < opts.diameter_tol {
            break Termination::SimplexCollapsed;
        }
        if iterations >= opts.max_iters {
            break Termination::MaxIterations;
        }
        iterations += 1;

        let worst = simplex[n].1;
        let second = simplex[n - 1].1;
        let best = simplex[0].1;
        let mut centroid = vec![0.0; n];
        for (x, _) in &simplex[..n] {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / n as f64;
            }
        }
        let along = |coef: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[n].0)
                .map(|(c, w)| c + coef * (c - w))
                .collect()
        };

        let xr = along(REFLECT);
        let fr = eval(&xr);
        if fr < best {
            let xe = along(EXPAND);
            let fe = eval(&xe);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < second {
            simplex[n] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < worst {
            let xc = along(CONTRACT * REFLECT);
            let fc = eval(&xc);
            (xc, fc)
        } else {
            let xc = along(-CONTRACT);
            let fc = eval(&xc);
            (xc, fc)
        };
        if fc < fr.min(worst) {
            simplex[n] = (xc, fc);
            continue;
        }
        let x_best = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            for (xi, bi) in vertex.0.iter_mut().zip(&x_best) {
                *xi = bi + SHRINK * (*xi - bi);
            }
            vertex.1 = eval(&vertex.0);
        }
    };

    let (x, value) = simplex.swap_remove(0);
    Minimum {
        x,
        value,
        iterations,
        evaluations,
        termination,
    }
}

fn diameter(simplex: &[(Vec<f64>, f64)]) -> f64 {
    let best = &simplex[0].0;
    simplex[1..]
        .iter()
        .map(|(x, _)| x.iter().zip(best).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_bowl() {
        let f = |x: &[f64]| (x[0] - 1.0).powi(2) + 4.0 * (x[1] + 2.0).powi(2);
        let m = minimize(f, &[0.0, 0.0], 0.5, &Options::default());
        assert_eq!(m.termination, Termination::SimplexCollapsed);
        assert!((m.x[0] - 1.0).abs() < 1e-8 && (m.x[1] + 2.0).abs() < 1e-8);
        assert!(m.value < 1e-15);
    }

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| 100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2);
        let opts = Options {
            max_iters: 5000,
            ..Options::default()
        };
        let m = minimize(f, &[-1.2, 1.0], 0.5, &opts);
        assert!((m.x[0] - 1.0).abs() < 1e-6 && (m.x[1] - 1.0).abs() < 1e-6, "{:?}", m.x);
    }

    #[test]
    fn one_dimensional_and_value_target() {
        let f = |x: &[f64]| (x[0] - 3.0).abs();
        let opts = Options {
            value_target: 1e-6,
            ..Options::default()
        };
        let m = minimize(f, &[0.0], 1.0, &opts);
        assert_eq!(m.termination, Termination::ValueTarget);
        assert!(m.value <= 1e-6);
    }

    #[test]
    fn nan_is_treated_as_worse() {
        let f = |x: &[f64]| if x[0] < 0.0 { f64::NAN } else { (x[0] - 0.5).powi(2) };
        let m = minimize(f, &[2.0], 1.0, &Options::default());
        assert!((m.x[0] - 0.5).abs() < 1e-8);
    }

    #[test]
    fn iteration_cap() {
        let f = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>();
        let opts = Options {
            max_iters: 3,
            ..Options::default()
        };
        let m = minimize(f, &[5.0, 5.0, 5.0], 1.0, &opts);
        assert_eq!(m.termination, Termination::MaxIterations);
        assert_eq!(m.iterations, 3);
    }
}
