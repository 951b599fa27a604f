//! Time grids, trajectories and fixed-step integration of parametrized
//! input-output ODE systems.
//!
//! Every system is integrated with classical RK4 on a uniform grid. The
//! input signal is evaluated analytically at the stage times, so two calls
//! with the same arguments produce bit-identical results.

mod rk4;
mod system;

pub use rk4::{
    integrate, integrate_with_table, output_sensitivity, output_trajectory, output_with_table, InputTable,
    OutputSensitivity,
};
pub use system::{Coordinate, InputSignal, ParamDomain, SystemFamily};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform grid on `[t_start, t_final]`.
///
/// Point `k` sits at `t_start + k * dt`, computed multiplicatively so long
/// grids do not accumulate drift.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    t_start: f64,
    t_final: f64,
    dt: f64,
    n_points: usize,
}

impl TimeGrid {
    pub const DEFAULT_T_FINAL: f64 = 10.0;
    pub const DEFAULT_DT: f64 = 0.01;

    /// Grid on `[0, t_final]`. The number of points is
    /// `round(t_final / dt) + 1`; `dt` is kept exactly as given.
    pub fn new(t_final: f64, dt: f64) -> Result<Self> {
        Self::with_start(0.0, t_final, dt)
    }

    pub fn with_start(t_start: f64, t_final: f64, dt: f64) -> Result<Self> {
        if !(t_start.is_finite() && t_final.is_finite() && dt.is_finite()) {
            return Err(Error::invalid("time grid bounds must be finite"));
        }
        if t_final <= t_start {
            return Err(Error::invalid(format!(
                "t_final ({t_final}) must exceed t_start ({t_start})"
            )));
        }
        if dt <= 0.0 {
            return Err(Error::invalid(format!("dt must be positive, got {dt}")));
        }
        let steps = ((t_final - t_start) / dt).round();
        if steps < 1.0 {
            return Err(Error::invalid("dt is larger than the time window"));
        }
        Ok(Self {
            t_start,
            t_final,
            dt,
            n_points: steps as usize + 1,
        })
    }

    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    /// Number of integration steps, `n_points - 1`.
    pub fn n_steps(&self) -> usize {
        self.n_points - 1
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t_start + k as f64 * self.dt
    }

    /// Time at half-step index `j`, i.e. `t_start + j * dt / 2`. Even `j`
    /// coincide with grid points; odd `j` are RK4 midpoint stages.
    pub fn half_time(&self, j: usize) -> f64 {
        self.t_start + j as f64 * (0.5 * self.dt)
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_points).map(|k| self.time(k))
    }

    /// Index of the first grid point at or after `t` (with a small tolerance
    /// so cutoffs that land on a grid point include it).
    pub fn first_index_at_or_after(&self, t: f64) -> usize {
        if t <= self.t_start {
            return 0;
        }
        let k = ((t - self.t_start) / self.dt - 1e-9).ceil();
        (k.max(0.0) as usize).min(self.n_points)
    }
}

/// Values on a [`TimeGrid`], `dim` components per grid point, stored
/// point-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    grid: TimeGrid,
    dim: usize,
    values: Vec<f64>,
}

impl Trajectory {
    pub fn new(grid: TimeGrid, dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("trajectory dimension must be positive"));
        }
        Error::check_len("trajectory values", grid.n_points() * dim, values.len())?;
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState {
                step: (pos / dim).saturating_sub(1),
            });
        }
        Ok(Self { grid, dim, values })
    }

    /// Scalar trajectory sampled from a function of time.
    pub fn from_fn(grid: TimeGrid, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.times().map(f).collect();
        Self::new(grid, 1, values)
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.grid.n_points()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn point(&self, k: usize) -> &[f64] {
        &self.values[k * self.dim..(k + 1) * self.dim]
    }

    pub fn last(&self) -> &[f64] {
        self.point(self.len() - 1)
    }

    /// Flat point-major storage.
    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    /// Component `c` across all grid points.
    pub fn component(&self, c: usize) -> Vec<f64> {
        self.values.iter().skip(c).step_by(self.dim).copied().collect()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_point_count_and_times() {
        let g = TimeGrid::new(10.0, 0.01).unwrap();
        assert_eq!(g.n_points(), 1001);
        assert_eq!(g.time(0), 0.0);
        assert_eq!(g.time(1000), 1000.0 * 0.01);
        assert_eq!(g.half_time(2 * 37), g.time(37));
        assert!((g.time(1000) - 10.0).abs() < 1e-12);
    }

    #[test]
    fn grid_rejects_degenerate_windows() {
        assert!(TimeGrid::new(0.0, 0.1).is_err());
        assert!(TimeGrid::new(1.0, 0.0).is_err());
        assert!(TimeGrid::new(1.0, -0.1).is_err());
        assert!(TimeGrid::new(1.0, 5.0).is_err());
        assert!(TimeGrid::new(f64::NAN, 0.1).is_err());
    }

    #[test]
    fn first_index_respects_grid_points() {
        let g = TimeGrid::new(10.0, 0.01).unwrap();
        assert_eq!(g.first_index_at_or_after(0.0), 0);
        assert_eq!(g.first_index_at_or_after(2.0), 200);
        assert_eq!(g.first_index_at_or_after(2.005), 201);
    }

    #[test]
    fn trajectory_rejects_non_finite_and_wrong_length() {
        let g = TimeGrid::new(1.0, 0.5).unwrap();
        assert!(matches!(
            Trajectory::new(g, 1, vec![0.0, 1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            Trajectory::new(g, 1, vec![0.0, f64::NAN, 1.0]),
            Err(Error::NonFiniteState { step: 0 })
        ));
        let t = Trajectory::new(g, 2, vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!(t.point(1), &[2.0, 3.0]);
        assert_eq!(t.component(1), vec![1.0, 3.0, 5.0]);
    }
}
