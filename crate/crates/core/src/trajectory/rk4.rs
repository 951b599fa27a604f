use super::system::{InputSignal, SystemFamily};
use super::{TimeGrid, Trajectory};
use crate::error::{Error, Result};

/// Input values at every half step of a grid: even entries are grid
/// points, odd entries the RK4 midpoint stages.
#[derive(Debug, Clone, PartialEq)]
pub struct InputTable {
    grid: TimeGrid,
    values: Vec<f64>,
}

impl InputTable {
    pub fn new<I: InputSignal + ?Sized>(signal: &I, grid: &TimeGrid) -> Self {
        let values = (0..2 * grid.n_steps() + 1)
            .map(|j| signal.value_at(grid.half_time(j)))
            .collect();
        Self { grid: *grid, values }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    /// Input at grid point `k`.
    pub fn at_point(&self, k: usize) -> f64 {
        self.values[2 * k]
    }

    /// Input at the midpoint of step `k`.
    pub fn at_midpoint(&self, k: usize) -> f64 {
        self.values[2 * k + 1]
    }
}

/// Output trajectory together with its derivative with respect to the
/// natural parameters at every grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputSensitivity {
    pub output: Vec<f64>,
    /// Row-major `n_points x param_dim`.
    pub jacobian: Vec<f64>,
    pub param_dim: usize,
}

impl OutputSensitivity {
    pub fn row(&self, k: usize) -> &[f64] {
        &self.jacobian[k * self.param_dim..(k + 1) * self.param_dim]
    }
}

fn check_params<S: SystemFamily + ?Sized>(system: &S, p: &[f64]) -> Result<()> {
    system.param_domain().check("system parameters", p)
}

#[inline]
fn offset(out: &mut [f64], base: &[f64], scale: f64, dir: &[f64]) {
    for ((o, &b), &d) in out.iter_mut().zip(base).zip(dir) {
        *o = b + scale * d;
    }
}

#[inline]
fn rk4_combine(x: &mut [f64], h: f64, k1: &[f64], k2: &[f64], k3: &[f64], k4: &[f64]) {
    let w = h / 6.0;
    for i in 0..x.len() {
        x[i] += w * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
}

/// State trajectory of `system` at parameters `p` under `input`, advanced
/// with classical RK4 at the grid's fixed step.
pub fn integrate<S, I>(system: &S, p: &[f64], input: &I, grid: &TimeGrid) -> Result<Trajectory>
where
    S: SystemFamily + ?Sized,
    I: InputSignal + ?Sized,
{
    integrate_with_table(system, p, &InputTable::new(input, grid))
}

pub fn integrate_with_table<S: SystemFamily + ?Sized>(system: &S, p: &[f64], table: &InputTable) -> Result<Trajectory> {
    check_params(system, p)?;
    let n = system.state_dim();
    let grid = *table.grid();
    let mut states = Vec::with_capacity(n * grid.n_points());
    let mut stepper = Stepper::new(n);
    let mut x = vec![0.0; n];
    system.initial_state(p, &mut x);
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteState { step: 0 });
    }
    states.extend_from_slice(&x);
    for step in 0..grid.n_steps() {
        stepper.advance(system, p, table, step, &mut x)?;
        states.extend_from_slice(&x);
    }
    Trajectory::new(grid, n, states)
}

/// Scalar output trajectory `o(t_k) = g(x(t_k), i(t_k), p)`.
pub fn output_trajectory<S, I>(system: &S, p: &[f64], input: &I, grid: &TimeGrid) -> Result<Trajectory>
where
    S: SystemFamily + ?Sized,
    I: InputSignal + ?Sized,
{
    output_with_table(system, p, &InputTable::new(input, grid))
}

pub fn output_with_table<S: SystemFamily + ?Sized>(system: &S, p: &[f64], table: &InputTable) -> Result<Trajectory> {
    check_params(system, p)?;
    let n = system.state_dim();
    let grid = *table.grid();
    let mut out = Vec::with_capacity(grid.n_points());
    let mut stepper = Stepper::new(n);
    let mut x = vec![0.0; n];
    system.initial_state(p, &mut x);
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteState { step: 0 });
    }
    out.push(system.output(&x, table.at_point(0), p));
    for step in 0..grid.n_steps() {
        stepper.advance(system, p, table, step, &mut x)?;
        out.push(system.output(&x, table.at_point(step + 1), p));
    }
    Trajectory::new(grid, 1, out)
}

/// Output trajectory and `d o(t_k) / d p` by forward sensitivity equations.
///
/// The sensitivities are propagated through the same RK4 stages as the
/// state, so they are the exact derivatives of the discrete map rather than
/// a discretization of the continuous sensitivity system.
pub fn output_sensitivity<S: SystemFamily + ?Sized>(
    system: &S,
    p: &[f64],
    table: &InputTable,
) -> Result<OutputSensitivity> {
    check_params(system, p)?;
    let n = system.state_dim();
    let m = system.param_dim();
    let grid = *table.grid();
    let h = grid.dt();

    let mut x = vec![0.0; n];
    let mut s = vec![0.0; n * m];
    system.initial_state(p, &mut x);
    system.initial_sensitivity(p, &mut s);

    let mut xs = vec![0.0; n];
    let mut ss = vec![0.0; n * m];
    let [mut k1, mut k2, mut k3, mut k4] = std::array::from_fn(|_| vec![0.0; n]);
    let [mut s1, mut s2, mut s3, mut s4] = std::array::from_fn(|_| vec![0.0; n * m]);
    let mut gx = vec![0.0; n];
    let mut gp = vec![0.0; m];

    let mut output = Vec::with_capacity(grid.n_points());
    let mut jacobian = Vec::with_capacity(grid.n_points() * m);

    let mut record = |x: &[f64], s: &[f64], u: f64| {
        output.push(system.output(x, u, p));
        system.output_gradient(x, u, p, &mut gx, &mut gp);
        let start = jacobian.len();
        jacobian.extend_from_slice(&gp);
        let row = &mut jacobian[start..];
        for (i, &g) in gx.iter().enumerate() {
            if g != 0.0 {
                for (r, &sv) in row.iter_mut().zip(&s[i * m..(i + 1) * m]) {
                    *r += g * sv;
                }
            }
        }
    };

    if x.iter().chain(&s).any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteState { step: 0 });
    }
    record(&x, &s, table.at_point(0));

    for step in 0..grid.n_steps() {
        let t0 = grid.time(step);
        let tm = grid.half_time(2 * step + 1);
        let t1 = grid.time(step + 1);
        let (u0, um, u1) = (table.at_point(step), table.at_midpoint(step), table.at_point(step + 1));

        system.rhs(t0, &x, u0, p, &mut k1);
        system.sensitivity_rhs(t0, &x, u0, p, &s, &mut s1);

        offset(&mut xs, &x, 0.5 * h, &k1);
        offset(&mut ss, &s, 0.5 * h, &s1);
        system.rhs(tm, &xs, um, p, &mut k2);
        system.sensitivity_rhs(tm, &xs, um, p, &ss, &mut s2);

        offset(&mut xs, &x, 0.5 * h, &k2);
        offset(&mut ss, &s, 0.5 * h, &s2);
        system.rhs(tm, &xs, um, p, &mut k3);
        system.sensitivity_rhs(tm, &xs, um, p, &ss, &mut s3);

        offset(&mut xs, &x, h, &k3);
        offset(&mut ss, &s, h, &s3);
        system.rhs(t1, &xs, u1, p, &mut k4);
        system.sensitivity_rhs(t1, &xs, u1, p, &ss, &mut s4);

        rk4_combine(&mut x, h, &k1, &k2, &k3, &k4);
        rk4_combine(&mut s, h, &s1, &s2, &s3, &s4);
        if x.iter().chain(&s).any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState { step });
        }
        record(&x, &s, u1);
    }

    Ok(OutputSensitivity {
        output,
        jacobian,
        param_dim: m,
    })
}

/// Scratch buffers for plain RK4 steps.
struct Stepper {
    xs: Vec<f64>,
    k: [Vec<f64>; 4],
}

impl Stepper {
    fn new(n: usize) -> Self {
        Self {
            xs: vec![0.0; n],
            k: std::array::from_fn(|_| vec![0.0; n]),
        }
    }

    fn advance<S: SystemFamily + ?Sized>(
        &mut self,
        system: &S,
        p: &[f64],
        table: &InputTable,
        step: usize,
        x: &mut [f64],
    ) -> Result<()> {
        let grid = table.grid();
        let h = grid.dt();
        let t0 = grid.time(step);
        let tm = grid.half_time(2 * step + 1);
        let t1 = grid.time(step + 1);
        let um = table.at_midpoint(step);
        let [k1, k2, k3, k4] = &mut self.k;
        let xs = &mut self.xs;

        system.rhs(t0, x, table.at_point(step), p, k1);
        offset(xs, x, 0.5 * h, k1);
        system.rhs(tm, xs, um, p, k2);
        offset(xs, x, 0.5 * h, k2);
        system.rhs(tm, xs, um, p, k3);
        offset(xs, x, h, k3);
        system.rhs(t1, xs, table.at_point(step + 1), p, k4);
        rk4_combine(x, h, k1, k2, k3, k4);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState { step });
        }
        Ok(())
    }
}
