//! Output distance, per-input specification fits and the sampled
//! estimators built on them.
//!
//! For one input the distance of the system to the specification is the
//! smallest output distance the specification reaches over its parameters.
//! The minimization is inexact, so every reported distance is an upper
//! bound on the true one.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::input::FourierSignal;
use crate::optim::{bfgs, BfgsOptions, OptimizerStatus};
use crate::trajectory::{output_sensitivity, output_with_table, InputTable, SystemFamily, TimeGrid, Trajectory};

/// Window of the output distance. Grid points before `transient_cutoff`
/// are excluded; the rest are integrated with the trapezoidal rule.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DistanceConfig {
    pub transient_cutoff: f64,
}

impl DistanceConfig {
    pub fn new(transient_cutoff: f64) -> Self {
        Self { transient_cutoff }
    }

    pub fn validate(&self, grid: &TimeGrid) -> Result<()> {
        let c = self.transient_cutoff;
        if !(c.is_finite() && c >= 0.0 && c < grid.t_final()) {
            return Err(Error::invalid(format!(
                "transient_cutoff must lie in [0, {}), got {c}",
                grid.t_final()
            )));
        }
        Ok(())
    }

    /// Trapezoidal weights for every grid point; zero before the cutoff.
    pub fn weights(&self, grid: &TimeGrid) -> Result<Vec<f64>> {
        self.validate(grid)?;
        let n = grid.n_points();
        let first = grid.first_index_at_or_after(self.transient_cutoff);
        let mut w = vec![0.0; n];
        if first + 1 < n {
            let dt = grid.dt();
            for wk in &mut w[first + 1..n - 1] {
                *wk = dt;
            }
            w[first] = 0.5 * dt;
            w[n - 1] = 0.5 * dt;
        }
        Ok(w)
    }
}

pub(crate) fn weighted_distance(a: &[f64], b: &[f64], weights: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .zip(weights)
        .map(|((x, y), w)| {
            let r = x - y;
            w * (r * r)
        })
        .sum()
}

/// Squared L2 distance between two trajectories over the configured window.
pub fn output_distance(o1: &Trajectory, o2: &Trajectory, cfg: &DistanceConfig) -> Result<f64> {
    if o1.grid() != o2.grid() {
        return Err(Error::GridMismatch(format!("{:?} vs {:?}", o1.grid(), o2.grid())));
    }
    if o1.dim() != o2.dim() {
        return Err(Error::GridMismatch(format!("dimension {} vs {}", o1.dim(), o2.dim())));
    }
    let w = cfg.weights(o1.grid())?;
    Ok((0..o1.len())
        .map(|k| {
            let sq: f64 = o1
                .point(k)
                .iter()
                .zip(o2.point(k))
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            w[k] * sq
        })
        .sum())
}

/// Budget of the per-input specification fit (BFGS in unconstrained
/// coordinates).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InnerFitConfig {
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    pub max_step: f64,
}

impl Default for InnerFitConfig {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            gradient_tolerance: 1e-10,
            max_step: 2.0,
        }
    }
}

impl InnerFitConfig {
    pub fn with_iterations(self, max_iterations: usize) -> Self {
        Self { max_iterations, ..self }
    }

    fn bfgs_options(&self) -> BfgsOptions {
        BfgsOptions {
            gradient_tolerance: self.gradient_tolerance,
            max_step: self.max_step,
            ..BfgsOptions::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InnerFitResult {
    /// Specification parameters reached, natural coordinates.
    pub q: Vec<f64>,
    /// Output distance at `q`; `+inf` if integration failed.
    pub distance: f64,
    pub n_evals: usize,
    pub converged: bool,
}

impl InnerFitResult {
    pub fn failed(&self) -> bool {
        !self.distance.is_finite()
    }

    fn failure(q: Vec<f64>) -> Self {
        Self {
            q,
            distance: f64::INFINITY,
            n_evals: 0,
            converged: false,
        }
    }
}

/// Value and gradient (natural coordinates) of `sum_k w_k (o_k - target_k)^2`
/// for the family at `p`.
pub(crate) fn distance_and_gradient<S: SystemFamily + ?Sized>(
    family: &S,
    p: &[f64],
    table: &InputTable,
    target: &[f64],
    weights: &[f64],
) -> Result<(f64, Vec<f64>)> {
    let sens = output_sensitivity(family, p, table)?;
    let m = sens.param_dim;
    let mut grad = vec![0.0; m];
    let mut value = 0.0;
    for (k, ((&o, &t), &w)) in sens.output.iter().zip(target).zip(weights).enumerate() {
        if w == 0.0 {
            continue;
        }
        let r = o - t;
        value += w * (r * r);
        let c = 2.0 * w * r;
        for (g, &d) in grad.iter_mut().zip(sens.row(k)) {
            *g += c * d;
        }
    }
    Ok((value, grad))
}

pub(crate) fn fit_tabulated<S: SystemFamily + ?Sized>(
    spec: &S,
    target: &[f64],
    table: &InputTable,
    weights: &[f64],
    q_init: &[f64],
    inner: &InnerFitConfig,
) -> InnerFitResult {
    let domain = spec.param_domain();
    let theta0 = domain.encode(q_init);
    let objective = |theta: &[f64]| {
        let q = domain.decode(theta);
        match distance_and_gradient(spec, &q, table, target, weights) {
            Ok((value, mut grad)) => {
                domain.chain_gradient(&q, &mut grad);
                (value, grad)
            }
            Err(_) => (f64::INFINITY, vec![f64::NAN; theta.len()]),
        }
    };
    let bounds = domain.search_box();
    let out = bfgs(
        objective,
        &theta0,
        inner.max_iterations,
        &inner.bfgs_options(),
        Some(&bounds),
    );
    let converged = out.status == OptimizerStatus::Converged;
    if !out.loss.is_finite() {
        return InnerFitResult {
            n_evals: out.evaluations,
            ..InnerFitResult::failure(q_init.to_vec())
        };
    }
    InnerFitResult {
        q: domain.decode(&out.params),
        distance: out.loss,
        n_evals: out.evaluations,
        converged,
    }
}

/// Fits the specification to one target output under `input`, starting
/// from `q_init`. Never returns a distance above the warm start's.
pub fn fit_spec_to_input<S: SystemFamily + ?Sized>(
    spec: &S,
    target: &Trajectory,
    input: &FourierSignal,
    q_init: &[f64],
    inner: &InnerFitConfig,
    cfg: &DistanceConfig,
) -> Result<InnerFitResult> {
    spec.param_domain().check("initial specification parameters", q_init)?;
    if target.dim() != 1 {
        return Err(Error::invalid("target output must be scalar"));
    }
    let grid = target.grid();
    let weights = cfg.weights(grid)?;
    let table = InputTable::new(input, grid);
    Ok(fit_tabulated(spec, target.as_slice(), &table, &weights, q_init, inner))
}

/// A system family, a specification family, and the grid and window on
/// which they are compared.
#[derive(Clone, Copy)]
pub struct Problem<'a> {
    pub system: &'a dyn SystemFamily,
    pub spec: &'a dyn SystemFamily,
    pub grid: TimeGrid,
    pub distance: DistanceConfig,
}

impl std::fmt::Debug for Problem<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Problem")
            .field("system", &self.system.name())
            .field("spec", &self.spec.name())
            .field("grid", &self.grid)
            .field("distance", &self.distance)
            .finish()
    }
}

impl<'a> Problem<'a> {
    pub fn new(
        system: &'a dyn SystemFamily,
        spec: &'a dyn SystemFamily,
        grid: TimeGrid,
        distance: DistanceConfig,
    ) -> Result<Self> {
        distance.validate(&grid)?;
        Ok(Self {
            system,
            spec,
            grid,
            distance,
        })
    }

    pub fn weights(&self) -> Vec<f64> {
        self.distance
            .weights(&self.grid)
            .expect("distance window validated at construction")
    }

    pub(crate) fn tables(&self, sample: &[FourierSignal]) -> Vec<InputTable> {
        sample.par_iter().map(|s| InputTable::new(s, &self.grid)).collect()
    }
}

/// Sampled estimate of the expected distance, with the per-input fits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhoEstimate {
    pub value: f64,
    pub fits: Vec<InnerFitResult>,
}

impl RhoEstimate {
    pub fn failed_fits(&self) -> usize {
        self.fits.iter().filter(|f| f.failed()).count()
    }

    pub fn nonconverged_fits(&self) -> usize {
        self.fits.iter().filter(|f| !f.converged).count()
    }

    pub fn distances(&self) -> Vec<f64> {
        self.fits.iter().map(|f| f.distance).collect()
    }

    pub fn qs(&self) -> Vec<Vec<f64>> {
        self.fits.iter().map(|f| f.q.clone()).collect()
    }
}

/// Mean of fitted distances.
fn mean_distance(fits: &[InnerFitResult]) -> f64 {
    fits.iter().map(|f| f.distance).sum::<f64>() / fits.len() as f64
}

/// Estimates the expected distance of the system at `p` over `sample`.
///
/// Each input gets its own specification fit, started from the matching
/// entry of `warm_starts` or from the specification's default parameters.
/// Fits run in parallel; the mean is summed in sample order, so the value
/// does not depend on the number of worker threads. Failed integrations
/// contribute `+inf`.
pub fn estimate_d_rho(
    problem: &Problem<'_>,
    p: &[f64],
    sample: &[FourierSignal],
    warm_starts: Option<&[Vec<f64>]>,
    inner: &InnerFitConfig,
) -> Result<RhoEstimate> {
    if sample.is_empty() {
        return Err(Error::invalid("sample must not be empty"));
    }
    problem.system.param_domain().check("system parameters", p)?;
    let default_q = problem.spec.default_params();
    if let Some(ws) = warm_starts {
        Error::check_len("warm starts", sample.len(), ws.len())?;
        for q in ws {
            problem.spec.param_domain().check("warm start", q)?;
        }
    }
    let weights = problem.weights();
    let fits: Vec<InnerFitResult> = sample
        .par_iter()
        .enumerate()
        .map(|(idx, signal)| {
            let q0 = warm_starts.map_or(&default_q, |ws| &ws[idx]);
            let table = InputTable::new(signal, &problem.grid);
            match output_with_table(problem.system, p, &table) {
                Ok(target) => fit_tabulated(problem.spec, target.as_slice(), &table, &weights, q0, inner),
                Err(_) => InnerFitResult::failure(q0.clone()),
            }
        })
        .collect();
    Ok(RhoEstimate {
        value: mean_distance(&fits),
        fits,
    })
}

/// Fraction of fits whose distance is strictly greater than `epsilon`.
pub fn estimate_d_rho_eps(fits: &[InnerFitResult], epsilon: f64) -> Result<f64> {
    if fits.is_empty() {
        return Err(Error::invalid("no fits to count"));
    }
    let failures = fits
        .iter()
        .filter(|f| f.distance.is_nan() || f.distance > epsilon)
        .count();
    Ok(failures as f64 / fits.len() as f64)
}

/// Center and half width of the 95% interval obtained by adding two
/// successes and two failures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub center: f64,
    pub halfwidth: f64,
}

impl ConfidenceInterval {
    pub fn lower(&self) -> f64 {
        (self.center - self.halfwidth).max(0.0)
    }

    pub fn upper(&self) -> f64 {
        (self.center + self.halfwidth).min(1.0)
    }

    pub fn contains(&self, p: f64) -> bool {
        self.lower() <= p && p <= self.upper()
    }
}

/// Interval for a failure fraction `d_hat` observed on `n` trials:
/// `n' = n + 4`, `d' = (n d_hat + 2) / n'`, `d' +- 2 sqrt(d' (1 - d') / n')`.
pub fn confidence_interval(d_hat: f64, n: usize) -> Result<ConfidenceInterval> {
    if n == 0 {
        return Err(Error::invalid("confidence interval needs at least one trial"));
    }
    if !(0.0..=1.0).contains(&d_hat) {
        return Err(Error::invalid(format!("fraction must lie in [0, 1], got {d_hat}")));
    }
    let n_tilde = (n + 4) as f64;
    let center = (n as f64 * d_hat + 2.0) / n_tilde;
    let halfwidth = 2.0 * (center * (1.0 - center) / n_tilde).sqrt();
    Ok(ConfidenceInterval { center, halfwidth })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonCurvePoint {
    pub epsilon: f64,
    pub fraction: f64,
    pub ci_center: f64,
    pub ci_halfwidth: f64,
}

impl EpsilonCurvePoint {
    pub fn interval(&self) -> ConfidenceInterval {
        ConfidenceInterval {
            center: self.ci_center,
            halfwidth: self.ci_halfwidth,
        }
    }
}

/// Failure fraction and its interval at every `epsilon` (ascending).
pub fn epsilon_curve(fits: &[InnerFitResult], epsilons: &[f64]) -> Result<Vec<EpsilonCurvePoint>> {
    if epsilons
        .windows(2)
        .any(|w| w[0].is_nan() || w[1].is_nan() || w[0] > w[1])
    {
        return Err(Error::invalid("epsilons must be sorted ascending"));
    }
    if epsilons.iter().any(|e| e.is_nan() || *e < 0.0) {
        return Err(Error::invalid("epsilons must be nonnegative"));
    }
    epsilons
        .iter()
        .map(|&epsilon| {
            let fraction = estimate_d_rho_eps(fits, epsilon)?;
            let ci = confidence_interval(fraction, fits.len())?;
            Ok(EpsilonCurvePoint {
                epsilon,
                fraction,
                ci_center: ci.center,
                ci_halfwidth: ci.halfwidth,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::input::{sample_inputs, InputEnsembleSpec};
    use crate::models::make_scalar_linear;
    use crate::trajectory::output_trajectory;
    use proptest::prelude::*;

    fn fit_with(distance: f64) -> InnerFitResult {
        InnerFitResult {
            q: vec![1.0],
            distance,
            n_evals: 0,
            converged: true,
        }
    }

    #[test]
    fn identical_trajectories_are_at_zero_distance() {
        let grid = TimeGrid::new(1.0, 0.01).unwrap();
        let o = Trajectory::from_fn(grid, |t| t.sin()).unwrap();
        assert_eq!(output_distance(&o, &o, &DistanceConfig::default()).unwrap(), 0.0);
    }

    #[test]
    fn constant_difference_is_integrated_exactly() {
        let grid = TimeGrid::new(2.0, 0.01).unwrap();
        let one = Trajectory::from_fn(grid, |_| 1.0).unwrap();
        let zero = Trajectory::from_fn(grid, |_| 0.0).unwrap();
        let d = output_distance(&one, &zero, &DistanceConfig::default()).unwrap();
        assert!((d - 2.0).abs() < 1e-12, "{d}");
    }

    #[test]
    fn ramp_matches_integral() {
        let grid = TimeGrid::new(1.0, 0.01).unwrap();
        let ramp = Trajectory::from_fn(grid, |t| t).unwrap();
        let zero = Trajectory::from_fn(grid, |_| 0.0).unwrap();
        let d = output_distance(&ramp, &zero, &DistanceConfig::default()).unwrap();
        assert!((d - 1.0 / 3.0).abs() < 1e-4);
    }

    #[test]
    fn cutoff_scales_constant_difference_linearly() {
        let grid = TimeGrid::new(10.0, 0.01).unwrap();
        let one = Trajectory::from_fn(grid, |_| 1.0).unwrap();
        let zero = Trajectory::from_fn(grid, |_| 0.0).unwrap();
        for cutoff in [0.0, 2.0, 5.0, 7.5] {
            let d = output_distance(&one, &zero, &DistanceConfig::new(cutoff)).unwrap();
            assert!((d - (10.0 - cutoff)).abs() < 1e-10);
        }
    }

    #[test]
    fn mismatched_grids_and_bad_cutoffs_are_rejected() {
        let a = Trajectory::from_fn(TimeGrid::new(1.0, 0.01).unwrap(), |_| 0.0).unwrap();
        let b = Trajectory::from_fn(TimeGrid::new(1.0, 0.02).unwrap(), |_| 0.0).unwrap();
        assert!(matches!(
            output_distance(&a, &b, &DistanceConfig::default()),
            Err(Error::GridMismatch(_))
        ));
        assert!(output_distance(&a, &a, &DistanceConfig::new(1.0)).is_err());
        assert!(output_distance(&a, &a, &DistanceConfig::new(-0.1)).is_err());
    }

    fn linear_target(a: f64, input: &FourierSignal, grid: &TimeGrid) -> Trajectory {
        output_trajectory(&make_scalar_linear(1.0), &[a], input, grid).unwrap()
    }

    #[test]
    fn self_fit_is_exact() {
        let grid = TimeGrid::new(5.0, 0.01).unwrap();
        let input = sample_inputs(&InputEnsembleSpec::new(5, 3), 1).unwrap().remove(0);
        let target = linear_target(0.7, &input, &grid);
        let spec = make_scalar_linear(1.0);
        let fit = fit_spec_to_input(
            &spec,
            &target,
            &input,
            &[0.7],
            &InnerFitConfig::default(),
            &DistanceConfig::default(),
        )
        .unwrap();
        assert_eq!(fit.distance, 0.0);
    }

    #[test]
    fn recovers_perturbed_parameters() {
        let grid = TimeGrid::new(5.0, 0.01).unwrap();
        let input = sample_inputs(&InputEnsembleSpec::new(5, 4), 1).unwrap().remove(0);
        let target = linear_target(0.7, &input, &grid);
        let spec = make_scalar_linear(1.0);
        let fit = fit_spec_to_input(
            &spec,
            &target,
            &input,
            &[0.77],
            &InnerFitConfig::default(),
            &DistanceConfig::default(),
        )
        .unwrap();
        assert!(fit.distance <= 1e-4, "{}", fit.distance);
        assert!((fit.q[0] - 0.7).abs() < 1e-3);
    }

    #[test]
    fn zero_iterations_keep_the_warm_start() {
        let grid = TimeGrid::new(5.0, 0.01).unwrap();
        let input = sample_inputs(&InputEnsembleSpec::new(5, 4), 1).unwrap().remove(0);
        let target = linear_target(0.7, &input, &grid);
        let spec = make_scalar_linear(1.0);
        let cfg = DistanceConfig::default();
        let fit = fit_spec_to_input(
            &spec,
            &target,
            &input,
            &[2.0],
            &InnerFitConfig::default().with_iterations(0),
            &cfg,
        )
        .unwrap();
        assert_eq!(fit.q, vec![2.0]);
        let at_init = output_trajectory(&spec, &[2.0], &input, &grid).unwrap();
        assert_eq!(fit.distance, output_distance(&target, &at_init, &cfg).unwrap());
    }

    #[test]
    fn reported_distance_is_self_consistent() {
        let grid = TimeGrid::new(5.0, 0.01).unwrap();
        let input = sample_inputs(&InputEnsembleSpec::new(5, 9), 1).unwrap().remove(0);
        let target = Trajectory::from_fn(grid, |t| (3.0 * t).cos()).unwrap();
        let spec = make_scalar_linear(1.0);
        let cfg = DistanceConfig::new(1.0);
        let fit = fit_spec_to_input(&spec, &target, &input, &[1.0], &InnerFitConfig::default(), &cfg).unwrap();
        let at_q = output_trajectory(&spec, &fit.q, &input, &grid).unwrap();
        let recomputed = output_distance(&target, &at_q, &cfg).unwrap();
        assert!((fit.distance - recomputed).abs() <= 1e-12 * recomputed.max(1.0));
    }

    #[test]
    fn epsilon_fraction_counts_strict_exceedances() {
        let fits: Vec<_> = [0.05, 0.2, 0.3].iter().map(|&d| fit_with(d)).collect();
        assert!((estimate_d_rho_eps(&fits, 0.1).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(estimate_d_rho_eps(&fits, 1.0).unwrap(), 0.0);
        assert!((estimate_d_rho_eps(&fits, 0.2).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!(estimate_d_rho_eps(&[], 0.1).is_err());
        // failed fits always count as exceedances
        assert_eq!(estimate_d_rho_eps(&[fit_with(f64::INFINITY)], 1e300).unwrap(), 1.0);
    }

    #[test]
    fn agresti_coull_values() {
        let ci = confidence_interval(0.0, 10).unwrap();
        assert!((ci.center - 2.0 / 14.0).abs() < 1e-15);
        let expected = 2.0 * ((2.0 / 14.0) * (12.0 / 14.0) / 14.0f64).sqrt();
        assert!((ci.halfwidth - expected).abs() < 1e-15);
        assert!((ci.halfwidth - 0.18704).abs() < 1e-5);

        let ci = confidence_interval(0.5, 4).unwrap();
        assert_eq!(ci.center, 0.5);
        assert!((ci.halfwidth - 0.35355).abs() < 1e-5);
        assert!(confidence_interval(0.5, 0).is_err());
        assert!(confidence_interval(1.5, 3).is_err());
    }

    #[test]
    fn curve_examples() {
        let curve = epsilon_curve(&[fit_with(0.5)], &[0.1, 1.0]).unwrap();
        assert_eq!(curve.iter().map(|p| p.fraction).collect::<Vec<_>>(), vec![1.0, 0.0]);
        let zeros: Vec<_> = (0..5).map(|_| fit_with(0.0)).collect();
        let curve = epsilon_curve(&zeros, &[0.0, 0.5, 2.0]).unwrap();
        assert!(curve.iter().all(|p| p.fraction == 0.0));
        assert!(epsilon_curve(&zeros, &[0.5, 0.1]).is_err());
    }

    #[test]
    fn estimate_is_mean_of_fits() {
        let grid = TimeGrid::new(3.0, 0.01).unwrap();
        let sys = make_scalar_linear(1.0);
        let problem = Problem::new(&sys, &sys, grid, DistanceConfig::default()).unwrap();
        let sample = sample_inputs(&InputEnsembleSpec::new(4, 1), 3).unwrap();
        let est = estimate_d_rho(
            &problem,
            &[0.5],
            &sample,
            None,
            &InnerFitConfig::default().with_iterations(0),
        )
        .unwrap();
        let mean = est.fits.iter().map(|f| f.distance).sum::<f64>() / 3.0;
        assert_eq!(est.value, mean);
        assert!(est.value > 0.0);
        let warm = vec![vec![0.5]; 3];
        let est = estimate_d_rho(&problem, &[0.5], &sample, Some(&warm), &InnerFitConfig::default()).unwrap();
        assert_eq!(est.value, 0.0);
        assert!(estimate_d_rho(&problem, &[0.5], &sample, Some(&warm[..2]), &InnerFitConfig::default()).is_err());
    }

    proptest! {
        #[test]
        fn curve_is_monotone(dists in proptest::collection::vec(0.0f64..2.0, 1..60), mut eps in proptest::collection::vec(0.0f64..2.5, 1..30)) {
            eps.sort_by(f64::total_cmp);
            let fits: Vec<_> = dists.iter().map(|&d| fit_with(d)).collect();
            let curve = epsilon_curve(&fits, &eps).unwrap();
            prop_assert!(curve.windows(2).all(|w| w[1].fraction <= w[0].fraction));
            prop_assert!(curve.iter().all(|p| p.ci_center > 0.0 && p.ci_center < 1.0));
        }

        #[test]
        fn interval_centers_are_symmetric(k in 0usize..50, extra in 0usize..50) {
            let n = k + extra + 1;
            let d = k as f64 / n as f64;
            let a = confidence_interval(d, n).unwrap();
            let b = confidence_interval((n - k) as f64 / n as f64, n).unwrap();
            prop_assert!((a.center + b.center - 1.0).abs() < 1e-12);
        }

        #[test]
        fn distance_root_is_a_seminorm(
            a in proptest::collection::vec(-3.0f64..3.0, 11),
            b in proptest::collection::vec(-3.0f64..3.0, 11),
            c in proptest::collection::vec(-3.0f64..3.0, 11),
            cutoff in 0.0f64..0.9,
        ) {
            let grid = TimeGrid::new(1.0, 0.1).unwrap();
            let cfg = DistanceConfig::new(cutoff);
            let t = |v: &Vec<f64>| Trajectory::new(grid, 1, v.clone()).unwrap();
            let (ta, tb, tc) = (t(&a), t(&b), t(&c));
            let dab = output_distance(&ta, &tb, &cfg).unwrap();
            let dba = output_distance(&tb, &ta, &cfg).unwrap();
            let dbc = output_distance(&tb, &tc, &cfg).unwrap();
            let dac = output_distance(&ta, &tc, &cfg).unwrap();
            prop_assert!(dab >= 0.0);
            prop_assert_eq!(dab, dba);
            prop_assert!(dac.sqrt() <= dab.sqrt() + dbc.sqrt() + 1e-12);
        }
    }
}
