#![allow(dead_code)]

use barrier_lqr::barrier::{conjugate, make_log_barrier};
use barrier_lqr::lti::{Plant, Problem};
use nalgebra::{dmatrix, dvector, DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn case1() -> Problem {
    let plant = Plant::new(dmatrix![-1.0, 2.0; -1.0, 1.0], dmatrix![1.0; 0.0]).unwrap();
    let dual = conjugate(make_log_barrier(3.0).unwrap());
    Problem::new(plant, 4.0, 0.1, 1.0, DMatrix::identity(2, 2), dvector![0.0, 0.0], dual, 50.0).unwrap()
}

pub fn case2() -> Problem {
    let plant = Plant::new(dmatrix![-1.0, 2.0; -1.0, 1.0], dmatrix![1.0; 0.0]).unwrap();
    let dual = conjugate(make_log_barrier(3.0).unwrap());
    Problem::new(plant, 4.0, 0.1, 1.0, DMatrix::identity(2, 2) * 10.0, dvector![1.0, 1.0], dual, 50.0).unwrap()
}

pub fn case_start() -> DVector<f64> {
    dvector![1.6, -1.6]
}

/// Single integrator with unit weights on a unit horizon, started at 0.5.
pub fn scalar() -> (Problem, DVector<f64>) {
    let plant = Plant::new(dmatrix![0.0], dmatrix![1.0]).unwrap();
    let dual = conjugate(make_log_barrier(3.0).unwrap());
    let p = Problem::new(plant, 1.0, 0.0, 1.0, dmatrix![1.0], dvector![0.0], dual, 50.0).unwrap();
    (p, dvector![0.5])
}

pub struct Instance {
    pub problem: Problem,
    pub alpha_of: Box<dyn Fn(f64) -> f64>,
    pub x0: DVector<f64>,
}

/// Random plant of dimension at most 3 with a rectified-sine schedule.
pub fn random_instance(rng: &mut ChaCha8Rng) -> Instance {
    let n = rng.gen_range(1..=3);
    let m = rng.gen_range(1..=n);
    let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    let b = DMatrix::from_fn(n, m, |_, _| rng.gen_range(-1.0..1.0));
    let l = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    let p_t = &l * l.transpose();
    let z = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
    let x0 = DVector::from_fn(n, |_, _| rng.gen_range(-1.5..1.5));
    let horizon = rng.gen_range(0.5..2.0);
    let kappa = rng.gen_range(0.5..2.0);
    let k = rng.gen_range(0.0..1.0);
    let dual = conjugate(make_log_barrier(3.0).unwrap());
    let problem = Problem::new(Plant::new(a, b).unwrap(), horizon, k, kappa, p_t, z, dual, 50.0).unwrap();
    let (amp, freq, off) = (rng.gen_range(0.0..10.0), rng.gen_range(0.5..3.0), rng.gen_range(0.0..10.0));
    Instance {
        problem,
        alpha_of: Box::new(move |s: f64| off + amp * (freq * s).sin().abs()),
        x0,
    }
}
