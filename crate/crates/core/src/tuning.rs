//! Joint tuning of system parameters and one copy of the specification
//! parameters per sampled input.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distance::{estimate_d_rho, weighted_distance, InnerFitConfig, Problem, RhoEstimate};
use crate::error::{Error, Result};
use crate::input::{sample_inputs, FourierSignal, InputEnsembleSpec};
use crate::optim::{
    run_optimizer_with_state, GradientMode, MomentState, OptimizerConfig, OptimizerKind, OptimizerStatus,
};
use crate::trajectory::{output_sensitivity, output_with_table, Coordinate, InputTable, ParamDomain, SystemFamily};

/// Central difference step in unconstrained coordinates.
pub const FD_STEP: f64 = 1e-5;

/// System parameters together with one specification parameter vector per
/// sample element, all in natural coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointParams {
    pub p: Vec<f64>,
    pub qs: Vec<Vec<f64>>,
}

impl JointParams {
    pub fn new(p: Vec<f64>, qs: Vec<Vec<f64>>) -> Self {
        Self { p, qs }
    }

    pub fn sample_size(&self) -> usize {
        self.qs.len()
    }

    pub fn validate(&self, problem: &Problem<'_>, sample_size: usize) -> Result<()> {
        problem.system.param_domain().check("system parameters", &self.p)?;
        Error::check_len("specification copies", sample_size, self.qs.len())?;
        let spec = problem.spec.param_domain();
        for q in &self.qs {
            spec.check("specification parameters", q)?;
        }
        Ok(())
    }

    /// Flat unconstrained vector `[p, q_1, q_2, ...]`.
    pub fn encode(&self, problem: &Problem<'_>) -> Vec<f64> {
        let mut theta = problem.system.param_domain().encode(&self.p);
        let spec = problem.spec.param_domain();
        for q in &self.qs {
            theta.extend(spec.encode(q));
        }
        theta
    }

    pub fn decode(problem: &Problem<'_>, theta: &[f64]) -> Result<Self> {
        let sys = problem.system.param_domain();
        let spec = problem.spec.param_domain();
        let (mp, mq) = (sys.dim(), spec.dim());
        if theta.len() < mp || (theta.len() - mp) % mq.max(1) != 0 {
            return Err(Error::invalid(format!(
                "flat vector of length {} does not split into {mp} + k * {mq}",
                theta.len()
            )));
        }
        let p = sys.decode(&theta[..mp]);
        let qs = if mq == 0 {
            Vec::new()
        } else {
            theta[mp..].chunks(mq).map(|c| spec.decode(c)).collect()
        };
        Ok(Self { p, qs })
    }
}

/// Per-sample pieces of the joint objective.
struct Summand {
    loss: f64,
    grad_p: Vec<f64>,
    grad_q: Vec<f64>,
}

/// Joint objective on a fixed sample with tabulated inputs.
pub(crate) struct JointObjective<'a> {
    problem: &'a Problem<'a>,
    tables: Vec<InputTable>,
    weights: Vec<f64>,
    sys_domain: &'a ParamDomain,
    spec_domain: &'a ParamDomain,
}

impl<'a> JointObjective<'a> {
    pub(crate) fn new(problem: &'a Problem<'a>, sample: &[FourierSignal]) -> Result<Self> {
        if sample.is_empty() {
            return Err(Error::invalid("sample must not be empty"));
        }
        Ok(Self {
            problem,
            tables: problem.tables(sample),
            weights: problem.weights(),
            sys_domain: problem.system.param_domain(),
            spec_domain: problem.spec.param_domain(),
        })
    }

    fn n(&self) -> usize {
        self.tables.len()
    }

    fn summand_loss(&self, i: usize, p: &[f64], q: &[f64]) -> f64 {
        let table = &self.tables[i];
        let sys = output_with_table(self.problem.system, p, table);
        let spec = output_with_table(self.problem.spec, q, table);
        match (sys, spec) {
            (Ok(a), Ok(b)) => weighted_distance(a.as_slice(), b.as_slice(), &self.weights),
            _ => f64::INFINITY,
        }
    }

    pub(crate) fn loss(&self, jp: &JointParams) -> f64 {
        let parts: Vec<f64> = (0..self.n())
            .into_par_iter()
            .map(|i| self.summand_loss(i, &jp.p, &jp.qs[i]))
            .collect();
        parts.iter().sum::<f64>() / self.n() as f64
    }

    /// Summand value and its gradients in natural coordinates.
    fn summand(&self, i: usize, p: &[f64], q: &[f64]) -> Option<Summand> {
        let table = &self.tables[i];
        let sys = output_sensitivity(self.problem.system, p, table).ok()?;
        let spec = output_sensitivity(self.problem.spec, q, table).ok()?;
        let mut grad_p = vec![0.0; sys.param_dim];
        let mut grad_q = vec![0.0; spec.param_dim];
        let mut loss = 0.0;
        for (k, &w) in self.weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let r = sys.output[k] - spec.output[k];
            loss += w * (r * r);
            let c = 2.0 * w * r;
            for (g, &d) in grad_p.iter_mut().zip(sys.row(k)) {
                *g += c * d;
            }
            for (g, &d) in grad_q.iter_mut().zip(spec.row(k)) {
                *g -= c * d;
            }
        }
        Some(Summand { loss, grad_p, grad_q })
    }

    /// Loss and gradient with respect to the flat unconstrained vector.
    pub(crate) fn loss_and_gradient(&self, jp: &JointParams, mode: GradientMode) -> (f64, Vec<f64>) {
        match mode {
            GradientMode::ForwardSensitivity => self.forward(jp),
            GradientMode::FiniteDifference => self.finite_difference(jp),
        }
    }

    fn forward(&self, jp: &JointParams) -> (f64, Vec<f64>) {
        let n = self.n();
        let mp = self.sys_domain.dim();
        let mq = self.spec_domain.dim();
        let parts: Vec<Option<Summand>> = (0..n)
            .into_par_iter()
            .map(|i| self.summand(i, &jp.p, &jp.qs[i]))
            .collect();
        let mut grad = vec![0.0; mp + n * mq];
        let mut loss = 0.0;
        let scale = 1.0 / n as f64;
        for (i, part) in parts.into_iter().enumerate() {
            let Some(s) = part else {
                return (f64::INFINITY, vec![f64::NAN; grad.len()]);
            };
            loss += s.loss;
            for (g, d) in grad[..mp].iter_mut().zip(&s.grad_p) {
                *g += d;
            }
            let block = &mut grad[mp + i * mq..mp + (i + 1) * mq];
            for (g, d) in block.iter_mut().zip(&s.grad_q) {
                *g = d * scale;
            }
            self.spec_domain.chain_gradient(&jp.qs[i], block);
        }
        for g in &mut grad[..mp] {
            *g *= scale;
        }
        self.sys_domain.chain_gradient(&jp.p, &mut grad[..mp]);
        (loss * scale, grad)
    }

    fn finite_difference(&self, jp: &JointParams) -> (f64, Vec<f64>) {
        let n = self.n();
        let mp = self.sys_domain.dim();
        let mq = self.spec_domain.dim();
        let h = FD_STEP;
        let scale = 1.0 / n as f64;
        let theta_p = self.sys_domain.encode(&jp.p);
        let spec_outputs: Vec<Option<Vec<f64>>> = (0..n)
            .into_par_iter()
            .map(|i| {
                output_with_table(self.problem.spec, &jp.qs[i], &self.tables[i])
                    .ok()
                    .map(|o| o.into_values())
            })
            .collect();
        if spec_outputs.iter().any(Option::is_none) {
            return (f64::INFINITY, vec![f64::NAN; mp + n * mq]);
        }
        let spec_outputs: Vec<Vec<f64>> = spec_outputs.into_iter().flatten().collect();
        let loss_at_p = |theta: &[f64]| -> f64 {
            let p = self.sys_domain.decode(theta);
            let parts: Vec<f64> = (0..n)
                .into_par_iter()
                .map(|i| match output_with_table(self.problem.system, &p, &self.tables[i]) {
                    Ok(o) => weighted_distance(o.as_slice(), &spec_outputs[i], &self.weights),
                    Err(_) => f64::INFINITY,
                })
                .collect();
            parts.iter().sum::<f64>() * scale
        };
        let loss = loss_at_p(&theta_p);
        let mut grad = Vec::with_capacity(mp + n * mq);
        for j in 0..mp {
            let mut plus = theta_p.clone();
            let mut minus = theta_p.clone();
            plus[j] += h;
            minus[j] -= h;
            grad.push((loss_at_p(&plus) - loss_at_p(&minus)) / (2.0 * h));
        }
        let q_blocks: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let theta_q = self.spec_domain.encode(&jp.qs[i]);
                (0..mq)
                    .map(|j| {
                        let mut plus = theta_q.clone();
                        let mut minus = theta_q.clone();
                        plus[j] += h;
                        minus[j] -= h;
                        let fp = self.summand_loss(i, &jp.p, &self.spec_domain.decode(&plus));
                        let fm = self.summand_loss(i, &jp.p, &self.spec_domain.decode(&minus));
                        (fp - fm) / (2.0 * h) * scale
                    })
                    .collect()
            })
            .collect();
        grad.extend(q_blocks.into_iter().flatten());
        (loss, grad)
    }

    pub(crate) fn flat_objective(&self, mode: GradientMode) -> impl FnMut(&[f64]) -> (f64, Vec<f64>) + '_ {
        move |theta: &[f64]| match JointParams::decode(self.problem, theta) {
            Ok(jp) => self.loss_and_gradient(&jp, mode),
            Err(_) => (f64::INFINITY, vec![f64::NAN; theta.len()]),
        }
    }
}

/// Mean over the sample of the output distance between the system at `p`
/// and the specification at `q_i`. No inner minimization takes place.
/// A diverging integration makes the loss `+inf`.
pub fn joint_loss(problem: &Problem<'_>, sample: &[FourierSignal], jp: &JointParams) -> Result<f64> {
    jp.validate(problem, sample.len())?;
    Ok(JointObjective::new(problem, sample)?.loss(jp))
}

/// Joint loss and its gradient with respect to [`JointParams::encode`]'s
/// flat unconstrained vector.
pub fn joint_gradient(
    problem: &Problem<'_>,
    sample: &[FourierSignal],
    jp: &JointParams,
    mode: GradientMode,
) -> Result<(f64, Vec<f64>)> {
    jp.validate(problem, sample.len())?;
    Ok(JointObjective::new(problem, sample)?.loss_and_gradient(jp, mode))
}

/// One optimizer stage on the joint objective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub label: String,
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub iterations: usize,
    pub loss_before: f64,
    pub loss_after: f64,
    pub status: OptimizerStatus,
    pub evaluations: usize,
    pub history: Vec<f64>,
    #[serde(skip)]
    pub wall_time_s: f64,
}

fn stage_label(cfg: &OptimizerConfig, idx: usize) -> String {
    match cfg.kind {
        OptimizerKind::Bfgs => format!("{} BFGS #{}", cfg.iterations, idx + 1),
        kind => format!(
            "{} {}({}) #{}",
            cfg.iterations,
            kind.label(),
            cfg.learning_rate,
            idx + 1
        ),
    }
}

/// Runs `schedule` in order on the joint objective, each stage starting
/// from the best point of the previous one. With `carry_moments` the
/// ADAM/AMSGrad moment estimates survive from one stage to the next;
/// otherwise every stage starts fresh.
pub fn run_joint_schedule(
    problem: &Problem<'_>,
    sample: &[FourierSignal],
    start: JointParams,
    schedule: &[OptimizerConfig],
    carry_moments: bool,
) -> Result<(JointParams, Vec<StageRecord>)> {
    start.validate(problem, sample.len())?;
    for cfg in schedule {
        if cfg.kind != OptimizerKind::Bfgs && !(cfg.learning_rate > 0.0 && cfg.learning_rate.is_finite()) {
            return Err(Error::invalid(format!(
                "learning rate must be positive, got {}",
                cfg.learning_rate
            )));
        }
    }
    let objective = JointObjective::new(problem, sample)?;
    let theta0 = start.encode(problem);
    let mut theta = theta0.clone();
    let spec_box = problem.spec.param_domain().search_box();
    let mut bounds = problem.system.param_domain().search_box();
    for _ in 0..sample.len() {
        bounds = bounds.concat(&spec_box);
    }
    let mut moments: Option<MomentState> = None;
    let mut records = Vec::with_capacity(schedule.len());
    for (idx, cfg) in schedule.iter().enumerate() {
        if !carry_moments {
            moments = None;
        }
        let clock = Instant::now();
        let out = run_optimizer_with_state(
            objective.flat_objective(cfg.gradient_mode),
            &theta,
            cfg,
            Some(&bounds),
            &mut moments,
        );
        theta = out.params;
        records.push(StageRecord {
            label: stage_label(cfg, idx),
            optimizer: cfg.kind,
            learning_rate: cfg.learning_rate,
            iterations: cfg.iterations,
            loss_before: out.initial_loss,
            loss_after: out.loss,
            status: out.status,
            evaluations: out.evaluations,
            history: out.history,
            wall_time_s: clock.elapsed().as_secs_f64(),
        });
    }
    // decoding would perturb untouched parameters by a rounding error
    let tuned = if theta == theta0 {
        start
    } else {
        JointParams::decode(problem, &theta)?
    };
    Ok((tuned, records))
}

/// One row of the tuning bookkeeping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningStep {
    pub label: String,
    pub optimizer: Option<OptimizerKind>,
    pub sample_size: usize,
    pub d_before: Option<f64>,
    pub d_after: f64,
    pub flags: Vec<String>,
    #[serde(skip)]
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningReport {
    pub steps: Vec<TuningStep>,
    pub p_tuned: Vec<f64>,
    pub final_in_sample: f64,
    pub final_resampled: Option<f64>,
    pub sample_sizes: Vec<usize>,
    pub moments_carried: bool,
    pub stages: Vec<StageRecord>,
    pub baseline: RhoEstimate,
    pub final_estimate: RhoEstimate,
    /// Joint parameters at the end of the last stage.
    pub joint: JointParams,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TuneOptions {
    pub inner: InnerFitConfig,
    pub carry_moments: bool,
    /// Starting points of the initial inner fits; the specification's
    /// default parameters when absent.
    pub warm_starts: Option<Vec<Vec<f64>>>,
}

/// Human-readable warnings about failed or unfinished fits.
pub fn estimate_flags(est: &RhoEstimate) -> Vec<String> {
    let mut flags = Vec::new();
    let failed = est.failed_fits();
    if failed > 0 {
        flags.push(format!("{failed} fits diverged"));
    }
    let open = est.nonconverged_fits() - failed;
    if open > 0 {
        flags.push(format!("{open} fits not converged"));
    }
    flags
}

/// Warnings about an optimizer stage that stopped abnormally.
pub fn stage_flags(rec: &StageRecord) -> Vec<String> {
    match rec.status {
        OptimizerStatus::LineSearchFailed => vec!["line search failed".into()],
        OptimizerStatus::NonFinite => vec!["non-finite loss".into()],
        _ => Vec::new(),
    }
}

/// Estimates the distance at `initial_p`, runs the schedule on the joint
/// objective warm-started from those fits, then re-estimates with free
/// inner fits started from the tuned specification copies.
pub fn tune(
    problem: &Problem<'_>,
    initial_p: &[f64],
    sample: &[FourierSignal],
    schedule: &[OptimizerConfig],
    opts: &TuneOptions,
) -> Result<TuningReport> {
    if schedule.is_empty() {
        return Err(Error::invalid("tuning schedule must not be empty"));
    }
    let n = sample.len();
    let clock = Instant::now();
    let baseline = estimate_d_rho(problem, initial_p, sample, opts.warm_starts.as_deref(), &opts.inner)?;
    let mut steps = vec![TuningStep {
        label: format!("estimate ({n} samples)"),
        optimizer: None,
        sample_size: n,
        d_before: None,
        d_after: baseline.value,
        flags: estimate_flags(&baseline),
        wall_time_s: clock.elapsed().as_secs_f64(),
    }];
    if baseline.failed_fits() > 0 {
        return Err(Error::invalid(format!(
            "{} integrations diverged at the initial parameters",
            baseline.failed_fits()
        )));
    }
    let start = JointParams::new(initial_p.to_vec(), baseline.qs());
    let (joint, stages) = run_joint_schedule(problem, sample, start, schedule, opts.carry_moments)?;
    for rec in &stages {
        steps.push(TuningStep {
            label: rec.label.clone(),
            optimizer: Some(rec.optimizer),
            sample_size: n,
            d_before: Some(rec.loss_before),
            d_after: rec.loss_after,
            flags: stage_flags(rec),
            wall_time_s: rec.wall_time_s,
        });
    }
    let clock = Instant::now();
    let before = stages.last().map(|r| r.loss_after);
    let final_estimate = estimate_d_rho(problem, &joint.p, sample, Some(&joint.qs), &opts.inner)?;
    steps.push(TuningStep {
        label: format!("re-estimate ({n} samples)"),
        optimizer: Some(OptimizerKind::Bfgs),
        sample_size: n,
        d_before: before,
        d_after: final_estimate.value,
        flags: estimate_flags(&final_estimate),
        wall_time_s: clock.elapsed().as_secs_f64(),
    });
    Ok(TuningReport {
        steps,
        p_tuned: joint.p.clone(),
        final_in_sample: final_estimate.value,
        final_resampled: None,
        sample_sizes: vec![n],
        moments_carried: opts.carry_moments,
        stages,
        baseline,
        final_estimate,
        joint,
    })
}

/// Estimate on a fresh sample drawn from `ensemble`, with cold inner fits.
pub fn resample_and_validate(
    problem: &Problem<'_>,
    p_tuned: &[f64],
    ensemble: &InputEnsembleSpec,
    n: usize,
    inner: &InnerFitConfig,
) -> Result<RhoEstimate> {
    if n == 0 {
        return Err(Error::invalid("resample size must be at least 1"));
    }
    let sample = sample_inputs(ensemble, n)?;
    estimate_d_rho(problem, p_tuned, &sample, None, inner)
}

/// Seeded random starting point: log-uniform on [0.1, 10] for positive
/// coordinates, uniform on [-1, 1] for real ones.
pub fn random_initial_guess(domain: &ParamDomain, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let span = 10f64.ln();
    domain
        .coords()
        .iter()
        .map(|c| match c {
            Coordinate::Positive => rng.random_range(-span..span).exp(),
            Coordinate::Real => rng.random_range(-1.0..1.0),
        })
        .collect()
}

/// Draws `count` random starting points with consecutive seeds.
pub fn random_initial_guesses<S: SystemFamily + ?Sized>(family: &S, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let domain = family.param_domain();
    (0..count as u64)
        .map(|k| random_initial_guess(domain, seed.wrapping_add(k)))
        .collect()
}
