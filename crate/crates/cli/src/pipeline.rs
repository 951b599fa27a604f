//! Runs a configured schedule of estimation, tuning and resampling steps
//! and collects the results into a [`Report`].

use std::time::Instant;

use probtune_core::models::{barabasi_albert, make_diffusive, make_kuramoto, make_scalar_linear, KuramotoConfig};
use probtune_core::{
    epsilon_curve, estimate_d_rho, estimate_flags, joint_loss, random_initial_guess, run_joint_schedule, sample_inputs,
    stage_flags, EpsilonCurvePoint, Error as CoreError, FourierSignal, InnerFitResult, InputEnsembleSpec, JointParams,
    OptimizerKind, OptimizerStatus, Problem, RhoEstimate, StageRecord, SystemFamily, TimeGrid,
};
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, FamilyConfig, ScheduleStep};
use crate::CliError;

pub const REPORT_FORMAT: &str = "probtune-report";
pub const REPORT_VERSION: u32 = 1;

/// A built model family together with what is needed to replay it.
pub struct Family {
    pub model: Box<dyn SystemFamily>,
    pub info: FamilyInfo,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyInfo {
    pub name: String,
    pub state_dim: usize,
    pub param_dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edges: Option<Vec<(usize, usize)>>,
    /// Scaled intrinsic frequencies.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omegas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pairs: Option<Vec<(usize, usize)>>,
}

fn core_config_error(e: CoreError) -> CliError {
    CliError::config(anyhow::Error::new(e))
}

fn core_run_error(e: CoreError) -> CliError {
    match e {
        CoreError::NonFiniteState { .. } => CliError::integration(anyhow::Error::new(e)),
        other => CliError::config(anyhow::Error::new(other)),
    }
}

pub fn build_family(cfg: &FamilyConfig) -> Result<Family, CliError> {
    let (model, edges, omegas, pairs, seed): (Box<dyn SystemFamily>, _, _, _, _) = match cfg {
        FamilyConfig::Diffusive { n, m, graph_seed } => {
            let adj = barabasi_albert(*n, *m, *graph_seed).map_err(core_config_error)?;
            let edges: Vec<_> = adj.edges().collect();
            (
                Box::new(make_diffusive(adj)),
                Some(edges),
                None,
                None,
                Some(*graph_seed),
            )
        }
        FamilyConfig::Kuramoto {
            n,
            coupling,
            spread,
            omega_seed,
            pair_range,
            tunable_frequencies,
        } => {
            let mut kc = KuramotoConfig::generate(*n, *omega_seed, *coupling, *spread);
            kc.pair_range = *pair_range;
            kc.tunable_frequencies = *tunable_frequencies;
            let omegas = kc.scaled_omegas();
            let net = make_kuramoto(kc).map_err(core_config_error)?;
            let pairs = net.pairs().to_vec();
            (Box::new(net), None, Some(omegas), Some(pairs), Some(*omega_seed))
        }
        FamilyConfig::ScalarLinear { a } => {
            if !(*a > 0.0 && a.is_finite()) {
                return Err(CliError::config(anyhow::anyhow!(
                    "scalar-linear rate must be positive, got {a}"
                )));
            }
            (Box::new(make_scalar_linear(*a)), None, None, None, None)
        }
    };
    let info = FamilyInfo {
        name: model.name().to_string(),
        state_dim: model.state_dim(),
        param_dim: model.param_dim(),
        edges,
        omegas,
        pairs,
    };
    Ok(Family { model, info, seed })
}

/// Everything derived from a config before any step runs.
pub struct Experiment {
    pub config: ExperimentConfig,
    pub system: Family,
    pub spec: Family,
    pub grid: TimeGrid,
    pub ensemble: InputEnsembleSpec,
    pub initial_p: Vec<f64>,
}

impl Experiment {
    pub fn new(config: ExperimentConfig) -> Result<Self, CliError> {
        let system = build_family(&config.system)?;
        let spec = build_family(&config.spec)?;
        let grid = TimeGrid::new(config.grid.t_final, config.grid.dt).map_err(core_config_error)?;
        config.distance.validate(&grid).map_err(core_config_error)?;
        let mut ensemble = InputEnsembleSpec::new(config.inputs.n_modes, config.inputs.seed);
        if let Some(sigma) = config.inputs.amplitude_sigma {
            ensemble.amplitude_sigma = sigma;
        }
        ensemble.validate().map_err(core_config_error)?;
        let domain = system.model.param_domain();
        let initial_p = match (&config.initial_params.values, config.initial_params.seed) {
            (Some(v), _) => v.clone(),
            (None, Some(seed)) => random_initial_guess(domain, seed),
            (None, None) => system.model.default_params(),
        };
        domain.check("initial_params", &initial_p).map_err(core_config_error)?;
        Ok(Self {
            config,
            system,
            spec,
            grid,
            ensemble,
            initial_p,
        })
    }

    pub fn problem(&self) -> Problem<'_> {
        Problem::new(
            self.system.model.as_ref(),
            self.spec.model.as_ref(),
            self.grid,
            self.config.distance,
        )
        .expect("validated in Experiment::new")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Seeds {
    pub inputs: u64,
    pub resamples: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_params: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<u64>,
}

/// One row of the schedule. Distances are `None` when not finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRow {
    pub index: usize,
    pub step: String,
    pub label: String,
    pub sample_size: usize,
    pub sample_seed: u64,
    pub d_before: Option<f64>,
    pub d_after: Option<f64>,
    pub failed_fits: usize,
    pub nonconverged_fits: usize,
    pub flags: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageSummary {
    pub step_index: usize,
    pub label: String,
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub iterations: usize,
    pub loss_before: Option<f64>,
    pub loss_after: Option<f64>,
    pub status: OptimizerStatus,
    pub evaluations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub sample_index: usize,
    pub distance: Option<f64>,
    pub converged: bool,
    pub q: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub format: String,
    pub version: u32,
    pub command: String,
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub config: ExperimentConfig,
    pub system: FamilyInfo,
    pub spec: FamilyInfo,
    pub seeds: Seeds,
    pub initial_p: Vec<f64>,
    pub steps: Vec<StepRow>,
    pub stages: Vec<StageSummary>,
    pub p_tuned: Vec<f64>,
    pub baseline: Option<f64>,
    pub final_in_sample: Option<f64>,
    pub final_resampled: Option<f64>,
    /// Baseline over the resampled value when present, the in-sample value
    /// otherwise.
    pub reduction_factor: Option<f64>,
    pub sample_sizes: Vec<usize>,
    pub moments_carried: bool,
    /// Row whose fits are listed in `per_sample`.
    pub per_sample_step: Option<usize>,
    #[serde(default)]
    pub per_sample: Vec<SampleRecord>,
}

impl Report {
    /// Resampled value if the schedule ends with a validation, in-sample
    /// value otherwise.
    pub fn tuned_value(&self) -> Option<f64> {
        self.final_resampled.or(self.final_in_sample)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimedEntry {
    pub label: String,
    pub wall_time_s: f64,
}

/// Wall-clock times, kept out of the report so reports stay reproducible.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub total_s: f64,
    pub steps: Vec<TimedEntry>,
    pub stages: Vec<TimedEntry>,
}

/// Report plus the data needed for the CSV outputs.
pub struct Run {
    pub report: Report,
    pub timings: Timings,
    /// `(step index, stage record)` for every optimizer stage.
    pub stage_records: Vec<(usize, StageRecord)>,
    /// Inputs belonging to `report.per_sample`.
    pub per_sample_inputs: Vec<FourierSignal>,
    /// System parameters in force when `report.per_sample` was computed.
    pub per_sample_p: Vec<f64>,
    pub failure: Option<CliError>,
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

fn sample_records(fits: &[InnerFitResult]) -> Vec<SampleRecord> {
    fits.iter()
        .enumerate()
        .map(|(k, f)| SampleRecord {
            sample_index: k,
            distance: finite(f.distance),
            converged: f.converged,
            q: f.q.clone(),
        })
        .collect()
}

/// Distances from report records; missing ones count as infinite.
pub fn fits_from_records(records: &[SampleRecord]) -> Vec<InnerFitResult> {
    records
        .iter()
        .map(|r| InnerFitResult {
            q: r.q.clone(),
            distance: r.distance.unwrap_or(f64::INFINITY),
            n_evals: 0,
            converged: r.converged,
        })
        .collect()
}

pub fn curve_from_report(report: &Report, eps: &[f64]) -> Result<Vec<EpsilonCurvePoint>, CliError> {
    if report.per_sample.is_empty() {
        return Err(CliError::missing(anyhow::anyhow!("report has no per-sample distances")));
    }
    epsilon_curve(&fits_from_records(&report.per_sample), eps).map_err(core_config_error)
}

fn tune_label(stages: &[crate::config::StageConfig], repetitions: usize, n: usize) -> String {
    let parts: Vec<String> = stages
        .iter()
        .map(|s| {
            let rep = if s.repetitions > 1 {
                format!("{} x ", s.repetitions)
            } else {
                String::new()
            };
            match s.optimizer {
                OptimizerKind::Bfgs => format!("{rep}{} BFGS", s.iterations),
                k => format!("{rep}{} {}({})", s.iterations, k.label(), s.lr),
            }
        })
        .collect();
    let body = parts.join(" + ");
    if repetitions > 1 {
        format!("tune {repetitions} x ({body}) on {n} samples")
    } else {
        format!("tune {body} on {n} samples")
    }
}

struct State {
    sample: Vec<FourierSignal>,
    sample_seed: u64,
    p: Vec<f64>,
    qs: Option<Vec<Vec<f64>>>,
}

/// Runs `steps` (the configured schedule unless overridden). Integration
/// failures end the run early; the partial report is still returned, with
/// the error in `failure`.
pub fn run(exp: &Experiment, command: &str, steps: &[ScheduleStep]) -> Result<Run, CliError> {
    let clock = Instant::now();
    let cfg = &exp.config;
    let problem = exp.problem();
    let inner = &cfg.inner;
    let sample = sample_inputs(&exp.ensemble, cfg.inputs.n_samples).map_err(core_config_error)?;
    let mut state = State {
        sample,
        sample_seed: cfg.inputs.seed,
        p: exp.initial_p.clone(),
        qs: None,
    };
    let mut rows: Vec<StepRow> = Vec::new();
    let mut timings = Timings::default();
    let mut stage_records = Vec::new();
    let mut resample_seeds = Vec::new();
    let mut sample_sizes = vec![state.sample.len()];
    let mut per_sample: Option<(usize, RhoEstimate, Vec<FourierSignal>, Vec<f64>)> = None;
    let mut failure = None;

    let estimate_row =
        |index: usize, step: &str, label: String, seed: u64, before: Option<f64>, est: &RhoEstimate| StepRow {
            index,
            step: step.to_string(),
            label,
            sample_size: est.fits.len(),
            sample_seed: seed,
            d_before: before,
            d_after: finite(est.value),
            failed_fits: est.failed_fits(),
            nonconverged_fits: est.nonconverged_fits(),
            flags: estimate_flags(est),
        };

    for (index, step) in steps.iter().enumerate() {
        let started = Instant::now();
        let n = state.sample.len();
        let row = match step {
            ScheduleStep::Estimate | ScheduleStep::Reestimate => {
                let (name, label, warm) = match step {
                    ScheduleStep::Estimate => ("estimate", format!("estimate on {n} samples"), None),
                    _ => ("reestimate", format!("re-estimate on {n} samples"), state.qs.as_deref()),
                };
                let before = rows.last().and_then(|r| r.d_after);
                let est = estimate_d_rho(&problem, &state.p, &state.sample, warm, inner).map_err(core_run_error)?;
                let row = estimate_row(index, name, label, state.sample_seed, before, &est);
                state.qs = Some(est.qs());
                per_sample = Some((index, est, state.sample.clone(), state.p.clone()));
                row
            }
            ScheduleStep::Resample { n_samples, seed, adopt } => {
                let seed = seed.unwrap_or(cfg.inputs.seed + resample_seeds.len() as u64 + 1);
                resample_seeds.push(seed);
                let fresh = sample_inputs(&exp.ensemble.with_seed(seed), *n_samples).map_err(core_config_error)?;
                let est = estimate_d_rho(&problem, &state.p, &fresh, None, inner).map_err(core_run_error)?;
                let (name, verb) = if *adopt {
                    ("resample-adopt", "resample and adopt")
                } else {
                    ("resample", "resample")
                };
                let row = estimate_row(
                    index,
                    name,
                    format!("{verb} {n_samples} samples (seed {seed})"),
                    seed,
                    None,
                    &est,
                );
                if *adopt {
                    state.sample = fresh.clone();
                    state.sample_seed = seed;
                    state.qs = Some(est.qs());
                    sample_sizes.push(fresh.len());
                }
                per_sample = Some((index, est, fresh, state.p.clone()));
                row
            }
            ScheduleStep::Tune { stages, repetitions } => {
                let qs = match &state.qs {
                    Some(qs) => qs.clone(),
                    None => {
                        return Err(CliError::config(anyhow::anyhow!(
                            "schedule.{index}: tune needs fits from an earlier estimate or adopted resample"
                        )))
                    }
                };
                let mut schedule = Vec::new();
                for _ in 0..*repetitions {
                    for st in stages {
                        for _ in 0..st.repetitions {
                            schedule.push(st.optimizer_config());
                        }
                    }
                }
                let start = JointParams::new(state.p.clone(), qs);
                let before = joint_loss(&problem, &state.sample, &start).map_err(core_run_error)?;
                let (tuned, records) = run_joint_schedule(&problem, &state.sample, start, &schedule, cfg.carry_moments)
                    .map_err(core_run_error)?;
                let after = match records.last() {
                    Some(r) => r.loss_after,
                    None => before,
                };
                let mut flags: Vec<String> = Vec::new();
                for rec in &records {
                    flags.extend(stage_flags(rec).into_iter().map(|f| format!("{}: {f}", rec.label)));
                }
                state.p = tuned.p;
                state.qs = Some(tuned.qs);
                for rec in records {
                    timings.stages.push(TimedEntry {
                        label: format!("step {index}: {}", rec.label),
                        wall_time_s: rec.wall_time_s,
                    });
                    stage_records.push((index, rec));
                }
                StepRow {
                    index,
                    step: "tune".into(),
                    label: tune_label(stages, *repetitions, n),
                    sample_size: n,
                    sample_seed: state.sample_seed,
                    d_before: finite(before),
                    d_after: finite(after),
                    failed_fits: 0,
                    nonconverged_fits: 0,
                    flags,
                }
            }
        };
        eprintln!(
            "[{}/{}] {}: {} ({:.1} s)",
            index + 1,
            steps.len(),
            row.label,
            row.d_after.map_or("non-finite".to_string(), |d| format!("{d:.6}")),
            started.elapsed().as_secs_f64()
        );
        timings.steps.push(TimedEntry {
            label: row.label.clone(),
            wall_time_s: started.elapsed().as_secs_f64(),
        });
        let failed = row.failed_fits;
        rows.push(row);
        if failed > 0 {
            failure = Some(CliError::integration(anyhow::anyhow!(
                "step {index}: {failed} integrations diverged; stopping"
            )));
            break;
        }
    }
    timings.total_s = clock.elapsed().as_secs_f64();

    let baseline = rows.first().and_then(|r| r.d_after);
    let in_sample_idx = rows.iter().rposition(|r| r.step != "resample");
    let final_in_sample = in_sample_idx.and_then(|i| rows[i].d_after);
    let final_resampled = rows
        .iter()
        .rposition(|r| r.step == "resample")
        .filter(|&i| in_sample_idx.is_none_or(|j| i > j))
        .and_then(|i| rows[i].d_after);
    let reduction_factor = match (baseline, final_resampled.or(final_in_sample)) {
        (Some(b), Some(t)) if t > 0.0 => Some(b / t),
        _ => None,
    };
    let stages = stage_records
        .iter()
        .map(|(idx, r)| StageSummary {
            step_index: *idx,
            label: r.label.clone(),
            optimizer: r.optimizer,
            learning_rate: r.learning_rate,
            iterations: r.iterations,
            loss_before: finite(r.loss_before),
            loss_after: finite(r.loss_after),
            status: r.status,
            evaluations: r.evaluations,
        })
        .collect();
    let (per_sample_step, records, inputs, per_sample_p) = match per_sample {
        Some((idx, est, inputs, p)) => (Some(idx), sample_records(&est.fits), inputs, p),
        None => (None, Vec::new(), Vec::new(), Vec::new()),
    };
    let report = Report {
        format: REPORT_FORMAT.into(),
        version: REPORT_VERSION,
        command: command.into(),
        status: if failure.is_some() {
            "integration-failure".into()
        } else {
            "ok".into()
        },
        error: failure.as_ref().map(|e: &CliError| format!("{:#}", e.error)),
        config: cfg.clone(),
        system: exp.system.info.clone(),
        spec: exp.spec.info.clone(),
        seeds: Seeds {
            inputs: cfg.inputs.seed,
            resamples: resample_seeds,
            initial_params: if cfg.initial_params.values.is_none() {
                cfg.initial_params.seed
            } else {
                None
            },
            system: exp.system.seed,
            spec: exp.spec.seed,
        },
        initial_p: exp.initial_p.clone(),
        steps: rows,
        stages,
        p_tuned: state.p,
        baseline,
        final_in_sample,
        final_resampled,
        reduction_factor,
        sample_sizes,
        moments_carried: cfg.carry_moments,
        per_sample_step,
        per_sample: records,
    };
    Ok(Run {
        report,
        timings,
        stage_records,
        per_sample_inputs: inputs,
        per_sample_p,
        failure,
    })
}
