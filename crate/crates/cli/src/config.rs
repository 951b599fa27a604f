//! Experiment configuration: one JSON document, optionally patched with
//! dotted-path overrides such as `inputs.seed=7`.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use probtune_core::models::PairRange;
use probtune_core::{DistanceConfig, GradientMode, InnerFitConfig, OptimizerConfig, OptimizerKind};
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub system: FamilyConfig,
    pub spec: FamilyConfig,
    pub grid: GridConfig,
    pub inputs: InputsConfig,
    #[serde(default)]
    pub distance: DistanceConfig,
    #[serde(default)]
    pub initial_params: InitialParams,
    #[serde(default)]
    pub inner: InnerFitConfig,
    #[serde(default)]
    pub schedule: Vec<ScheduleStep>,
    /// Keep ADAM/AMSGrad moment estimates from one stage to the next.
    #[serde(default)]
    pub carry_moments: bool,
    #[serde(default)]
    pub epsilons: EpsilonGrid,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_m() -> usize {
    2
}

fn default_coupling() -> f64 {
    1.0
}

fn default_rate() -> f64 {
    1.0
}

fn one() -> usize {
    1
}

fn default_lr() -> f64 {
    OptimizerConfig::DEFAULT_LEARNING_RATE
}

fn default_modes() -> usize {
    10
}

/// A model family, used for both the system and the specification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FamilyConfig {
    /// Diffusive network on a preferential-attachment graph with `n`
    /// nodes. With `n = 2` the graph is a single edge.
    Diffusive {
        n: usize,
        #[serde(default = "default_m")]
        m: usize,
        #[serde(default)]
        graph_seed: u64,
    },
    /// Second-order Kuramoto network. `n = 1` is a single oscillator.
    Kuramoto {
        n: usize,
        #[serde(default = "default_coupling")]
        coupling: f64,
        #[serde(default = "default_rate")]
        spread: f64,
        #[serde(default)]
        omega_seed: u64,
        #[serde(default)]
        pair_range: PairRange,
        #[serde(default)]
        tunable_frequencies: bool,
    },
    ScalarLinear {
        #[serde(default = "default_rate")]
        a: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub t_final: f64,
    pub dt: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputsConfig {
    #[serde(default = "default_modes")]
    pub n_modes: usize,
    /// Defaults to `1 / sqrt(n_modes + 1)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude_sigma: Option<f64>,
    pub seed: u64,
    pub n_samples: usize,
}

/// Starting system parameters: drawn from `seed`, given explicitly, or the
/// family defaults when both are absent.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "step", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ScheduleStep {
    /// Free inner fits from the specification's default parameters.
    Estimate,
    /// Joint optimization of the system and the current fits.
    Tune {
        stages: Vec<StageConfig>,
        #[serde(default = "one")]
        repetitions: usize,
    },
    /// Free inner fits warm-started from the current fits.
    Reestimate,
    /// Cold fits on a fresh sample. With `adopt` the new sample replaces the
    /// current one for the following steps.
    Resample {
        n_samples: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
        #[serde(default)]
        adopt: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageConfig {
    pub optimizer: OptimizerKind,
    #[serde(default = "default_lr")]
    pub lr: f64,
    pub iterations: usize,
    #[serde(default = "one")]
    pub repetitions: usize,
    #[serde(default)]
    pub gradient_mode: GradientMode,
}

impl StageConfig {
    pub fn new(optimizer: OptimizerKind, iterations: usize) -> Self {
        Self {
            optimizer,
            lr: default_lr(),
            iterations,
            repetitions: 1,
            gradient_mode: GradientMode::default(),
        }
    }

    pub fn optimizer_config(&self) -> OptimizerConfig {
        OptimizerConfig::new(self.optimizer, self.iterations)
            .with_learning_rate(self.lr)
            .with_gradient_mode(self.gradient_mode)
    }
}

/// ε values for the exceedance curve: an explicit list or `count` evenly
/// spaced points from `start` to `stop`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EpsilonGrid {
    Values(Vec<f64>),
    Linear { start: f64, stop: f64, count: usize },
}

impl Default for EpsilonGrid {
    fn default() -> Self {
        EpsilonGrid::Linear {
            start: 0.0,
            stop: 1.0,
            count: 101,
        }
    }
}

impl EpsilonGrid {
    pub fn values(&self) -> Result<Vec<f64>> {
        let eps = match self {
            EpsilonGrid::Values(v) => v.clone(),
            EpsilonGrid::Linear { start, stop, count } => match count {
                0 => Vec::new(),
                1 => vec![*start],
                _ => (0..*count)
                    .map(|k| start + (stop - start) * k as f64 / (*count - 1) as f64)
                    .collect(),
            },
        };
        if eps.is_empty() {
            bail!("epsilon grid is empty");
        }
        if eps.iter().any(|e| !e.is_finite() || *e < 0.0) || eps.windows(2).any(|w| w[0] > w[1]) {
            bail!("epsilon grid must be finite, nonnegative and sorted");
        }
        Ok(eps)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default)]
    pub spreads: Vec<f64>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_value(serde_json::from_str(text).context("config is not valid JSON")?)
    }

    pub fn from_value(value: Value) -> Result<Self> {
        let cfg: Self = serde_json::from_value(value).context("invalid config")?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_json(&text).with_context(|| format!("in {}", path.display()))
    }

    /// Re-parses the config with `overrides` (`path=value`) applied.
    pub fn with_overrides(&self, overrides: &[String]) -> Result<Self> {
        if overrides.is_empty() {
            return Ok(self.clone());
        }
        let mut value = serde_json::to_value(self)?;
        for ov in overrides {
            apply_override(&mut value, ov)?;
        }
        Self::from_value(value)
    }

    pub fn to_pretty_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    fn check(&self) -> Result<()> {
        if self.inputs.n_samples == 0 {
            bail!("inputs.n_samples must be at least 1");
        }
        if let (Some(_), Some(_)) = (&self.initial_params.seed, &self.initial_params.values) {
            bail!("initial_params: give either seed or values, not both");
        }
        for (k, step) in self.schedule.iter().enumerate() {
            match step {
                ScheduleStep::Tune { stages, .. } => {
                    for st in stages {
                        if st.optimizer != OptimizerKind::Bfgs && !(st.lr > 0.0 && st.lr.is_finite()) {
                            bail!("schedule.{k}: learning rate must be positive, got {}", st.lr);
                        }
                    }
                }
                ScheduleStep::Resample { n_samples: 0, .. } => bail!("schedule.{k}: n_samples must be at least 1"),
                _ => {}
            }
        }
        if self.sweep.spreads.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            bail!("sweep.spreads must be positive");
        }
        self.epsilons.values().context("epsilons")?;
        Ok(())
    }
}

/// Sets the value at a dotted path. The right-hand side is read as JSON when
/// it parses, as a string otherwise. Numeric segments index arrays.
pub fn apply_override(root: &mut Value, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| anyhow!("override {assignment:?} is not of the form path=value"))?;
    let path = path.trim_start_matches('-');
    let new: Value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = root;
    let segments: Vec<&str> = path.split('.').collect();
    if segments.iter().any(|s| s.is_empty()) {
        bail!("override path {path:?} has an empty segment");
    }
    for seg in &segments[..segments.len() - 1] {
        node = step_into(node, seg, path)?;
    }
    let last = segments[segments.len() - 1];
    match node {
        Value::Object(map) => {
            map.insert(last.to_string(), new);
        }
        Value::Array(items) => {
            let idx: usize = last
                .parse()
                .map_err(|_| anyhow!("{path}: {last:?} is not an array index"))?;
            let len = items.len();
            *items
                .get_mut(idx)
                .ok_or_else(|| anyhow!("{path}: index {idx} out of range ({len} items)"))? = new;
        }
        _ => bail!("{path}: cannot set a field inside a scalar"),
    }
    Ok(())
}

fn step_into<'v>(node: &'v mut Value, seg: &str, path: &str) -> Result<&'v mut Value> {
    match node {
        Value::Object(map) => Ok(map
            .entry(seg.to_string())
            .or_insert_with(|| Value::Object(Default::default()))),
        Value::Array(items) => {
            let idx: usize = seg
                .parse()
                .map_err(|_| anyhow!("{path}: {seg:?} is not an array index"))?;
            let len = items.len();
            items
                .get_mut(idx)
                .ok_or_else(|| anyhow!("{path}: index {idx} out of range ({len} items)"))
        }
        _ => bail!("{path}: cannot descend into a scalar at {seg:?}"),
    }
}

/// Diffusive experiment: 10-node preferential-attachment
/// network against a two-node specification.
pub fn diffusive_demo() -> ExperimentConfig {
    let round = vec![
        StageConfig::new(OptimizerKind::Adam, 50),
        StageConfig::new(OptimizerKind::Amsgrad, 200),
    ];
    ExperimentConfig {
        system: FamilyConfig::Diffusive {
            n: 10,
            m: 2,
            graph_seed: 42,
        },
        spec: FamilyConfig::Diffusive {
            n: 2,
            m: 1,
            graph_seed: 0,
        },
        grid: GridConfig {
            t_final: 10.0,
            dt: 0.01,
        },
        inputs: InputsConfig {
            n_modes: 10,
            amplitude_sigma: None,
            seed: 1,
            n_samples: 10,
        },
        distance: DistanceConfig::default(),
        initial_params: InitialParams {
            seed: Some(7),
            values: None,
        },
        inner: InnerFitConfig::default(),
        schedule: vec![
            ScheduleStep::Estimate,
            ScheduleStep::Tune {
                stages: round.clone(),
                repetitions: 1,
            },
            ScheduleStep::Reestimate,
            ScheduleStep::Resample {
                n_samples: 10,
                seed: None,
                adopt: false,
            },
            ScheduleStep::Resample {
                n_samples: 100,
                seed: None,
                adopt: true,
            },
            ScheduleStep::Tune {
                stages: round,
                repetitions: 10,
            },
            ScheduleStep::Reestimate,
            ScheduleStep::Resample {
                n_samples: 100,
                seed: None,
                adopt: false,
            },
        ],
        carry_moments: false,
        epsilons: EpsilonGrid::default(),
        sweep: SweepConfig::default(),
        output_dir: PathBuf::from("out/diffusive"),
    }
}

/// Ten second-order Kuramoto oscillators against a single oscillator,
/// with the distance measured after a transient of 2 time units.
pub fn kuramoto_demo() -> ExperimentConfig {
    ExperimentConfig {
        system: FamilyConfig::Kuramoto {
            n: 10,
            coupling: 1.0,
            spread: 1.2,
            omega_seed: 42,
            pair_range: PairRange::All,
            tunable_frequencies: false,
        },
        spec: FamilyConfig::Kuramoto {
            n: 1,
            coupling: 1.0,
            spread: 1.0,
            omega_seed: 0,
            pair_range: PairRange::All,
            tunable_frequencies: false,
        },
        grid: GridConfig {
            t_final: 10.0,
            dt: 0.01,
        },
        inputs: InputsConfig {
            n_modes: 10,
            amplitude_sigma: None,
            seed: 1,
            n_samples: 10,
        },
        distance: DistanceConfig::new(2.0),
        initial_params: InitialParams {
            seed: Some(7),
            values: None,
        },
        inner: InnerFitConfig::default(),
        schedule: vec![
            ScheduleStep::Estimate,
            ScheduleStep::Tune {
                stages: vec![StageConfig::new(OptimizerKind::Adam, 100)],
                repetitions: 1,
            },
            ScheduleStep::Tune {
                stages: vec![StageConfig::new(OptimizerKind::Bfgs, 100)],
                repetitions: 1,
            },
            ScheduleStep::Resample {
                n_samples: 10,
                seed: None,
                adopt: false,
            },
        ],
        carry_moments: false,
        epsilons: EpsilonGrid::default(),
        sweep: SweepConfig {
            spreads: vec![1.2, 4.5],
        },
        output_dir: PathBuf::from("out/kuramoto"),
    }
}

/// Scalar linear system against its own family; the distance is zero.
pub fn scalar_linear_example() -> ExperimentConfig {
    ExperimentConfig {
        system: FamilyConfig::ScalarLinear { a: 2.0 },
        spec: FamilyConfig::ScalarLinear { a: 1.0 },
        grid: GridConfig { t_final: 5.0, dt: 0.01 },
        inputs: InputsConfig {
            n_modes: 5,
            amplitude_sigma: None,
            seed: 1,
            n_samples: 10,
        },
        distance: DistanceConfig::default(),
        initial_params: InitialParams::default(),
        inner: InnerFitConfig::default(),
        schedule: vec![ScheduleStep::Estimate],
        carry_moments: false,
        epsilons: EpsilonGrid::Values(vec![1e-6, 1e-3, 0.1]),
        sweep: SweepConfig::default(),
        output_dir: PathBuf::from("out/scalar-linear"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn demos_round_trip() {
        for cfg in [diffusive_demo(), kuramoto_demo(), scalar_linear_example()] {
            let back = ExperimentConfig::from_json(&cfg.to_pretty_json()).unwrap();
            assert_eq!(back, cfg);
        }
    }

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg = ExperimentConfig::from_json(
            r#"{"system": {"kind": "diffusive", "n": 4},
                "spec": {"kind": "diffusive", "n": 2, "m": 1},
                "grid": {"t_final": 2.0, "dt": 0.01},
                "inputs": {"seed": 3, "n_samples": 4},
                "schedule": [{"step": "estimate"},
                             {"step": "tune", "stages": [{"optimizer": "adam", "iterations": 5}]}]}"#,
        )
        .unwrap();
        assert_eq!(cfg.inputs.n_modes, 10);
        assert_eq!(cfg.inner, InnerFitConfig::default());
        match &cfg.schedule[1] {
            ScheduleStep::Tune { stages, repetitions } => {
                assert_eq!(*repetitions, 1);
                assert_eq!(stages[0].lr, 0.01);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let mut v = serde_json::to_value(diffusive_demo()).unwrap();
        v["grid"]["dx"] = Value::from(1.0);
        assert!(ExperimentConfig::from_value(v).is_err());
        let mut v = serde_json::to_value(diffusive_demo()).unwrap();
        v["system"]["spread"] = Value::from(1.0);
        assert!(ExperimentConfig::from_value(v).is_err());
    }

    #[test]
    fn overrides_patch_nested_values() {
        let cfg = diffusive_demo()
            .with_overrides(&[
                "--inputs.seed=9".into(),
                "schedule.1.stages.0.iterations=3".into(),
                "output_dir=elsewhere".into(),
                "distance.transient_cutoff=0.5".into(),
            ])
            .unwrap();
        assert_eq!(cfg.inputs.seed, 9);
        assert_eq!(cfg.output_dir, PathBuf::from("elsewhere"));
        assert_eq!(cfg.distance.transient_cutoff, 0.5);
        match &cfg.schedule[1] {
            ScheduleStep::Tune { stages, .. } => assert_eq!(stages[0].iterations, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_overrides_fail() {
        let cfg = diffusive_demo();
        assert!(cfg.with_overrides(&["inputs.seed".into()]).is_err());
        assert!(cfg.with_overrides(&["inputs.seed=\"x\"".into()]).is_err());
        assert!(cfg.with_overrides(&["schedule.40.step=estimate".into()]).is_err());
        assert!(cfg.with_overrides(&["inputs..seed=1".into()]).is_err());
        assert!(cfg.with_overrides(&["inputs.n_samples=0".into()]).is_err());
    }

    #[test]
    fn epsilon_grids() {
        assert_eq!(EpsilonGrid::Values(vec![0.1, 0.2]).values().unwrap(), vec![0.1, 0.2]);
        let lin = EpsilonGrid::Linear {
            start: 0.0,
            stop: 1.0,
            count: 5,
        }
        .values()
        .unwrap();
        assert_eq!(lin, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert!(EpsilonGrid::Values(vec![0.2, 0.1]).values().is_err());
        assert!(EpsilonGrid::Values(vec![]).values().is_err());
    }
}
