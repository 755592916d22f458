/// One classical fourth-order Runge-Kutta step of `dy/dt = f(t, y)`.
///
/// `f` writes the derivative into its output slice. A negative `h` steps
/// backwards.
pub(crate) fn rk4_step<F>(f: &mut F, t: f64, y: &[f64], h: f64) -> Vec<f64>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let n = y.len();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];

    f(t, y, &mut k1);
    for i in 0..n {
        tmp[i] = y[i] + 0.5 * h * k1[i];
    }
    f(t + 0.5 * h, &tmp, &mut k2);
    for i in 0..n {
        tmp[i] = y[i] + 0.5 * h * k2[i];
    }
    f(t + 0.5 * h, &tmp, &mut k3);
    for i in 0..n {
        tmp[i] = y[i] + h * k3[i];
    }
    f(t + h, &tmp, &mut k4);

    (0..n)
        .map(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect()
}

/// Reusable stage buffers for repeated RK4 steps of one system size.
pub(crate) struct Rk4 {
    k: [Vec<f64>; 4],
    tmp: Vec<f64>,
}

impl Rk4 {
    pub fn new(n: usize) -> Self {
        Rk4 {
            k: [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]],
            tmp: vec![0.0; n],
        }
    }

    /// Advances `y` in place by one step of size `h`.
    pub fn step<F>(&mut self, f: &mut F, t: f64, y: &mut [f64], h: f64)
    where
        F: FnMut(f64, &[f64], &mut [f64]),
    {
        let [k1, k2, k3, k4] = &mut self.k;
        let tmp = &mut self.tmp;
        f(t, y, k1);
        for i in 0..y.len() {
            tmp[i] = y[i] + 0.5 * h * k1[i];
        }
        f(t + 0.5 * h, tmp, k2);
        for i in 0..y.len() {
            tmp[i] = y[i] + 0.5 * h * k2[i];
        }
        f(t + 0.5 * h, tmp, k3);
        for i in 0..y.len() {
            tmp[i] = y[i] + h * k3[i];
        }
        f(t + h, tmp, k4);
        for i in 0..y.len() {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
}
