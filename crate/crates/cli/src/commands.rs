//! Argument parsing and the subcommands.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use anyhow::anyhow;
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{self, ExperimentConfig, FamilyConfig, ScheduleStep};
use crate::output::{self, SweepRow};
use crate::pipeline::{self, Experiment};
use crate::{CliError, EXIT_OK};

#[derive(Debug, Parser)]
#[command(
    name = "probtune",
    version,
    about = "Estimate and tune probabilistic behavioral distances of IO-ODE systems",
    after_help = "Config keys can be overridden with dotted paths, e.g. --inputs.seed=7 or \
                  --schedule.1.stages.0.iterations=20, or with --set PATH=VALUE (also for top-level \
                  keys such as --set epsilons=[0.05,0.1])."
)]
pub struct Cli {
    /// Worker threads for sample-parallel work; 1 gives bit-exact reruns.
    #[arg(long, global = true)]
    pub workers: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Experiment config (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Directory for outputs; defaults to the config's output_dir.
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DemoKind {
    Diffusive,
    Kuramoto,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ExampleKind {
    Diffusive,
    Kuramoto,
    ScalarLinear,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate the distance of the initial system on the configured sample.
    Estimate(RunArgs),
    /// Run the configured schedule of estimate, tune, re-estimate and
    /// resample steps.
    Tune(RunArgs),
    /// Exceedance curve with confidence intervals from a report's
    /// per-sample distances.
    Curve {
        /// report.json of an estimate or tune run.
        #[arg(long)]
        report: PathBuf,
        /// Take the epsilon grid from this config instead of the report.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Defaults to the report's directory.
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Run the schedule once per frequency spread of a Kuramoto system.
    SweepSpread {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated spreads; defaults to sweep.spreads.
        #[arg(long, value_delimiter = ',')]
        spreads: Option<Vec<f64>>,
    },
    /// Built-in experiments: the diffusive tuning pipeline with its
    /// exceedance curve, or the Kuramoto spread comparison.
    Demo {
        kind: DemoKind,
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Print a complete example config.
    InitConfig { kind: ExampleKind },
}

/// Splits `--a.b=v`, `--a.b v` and `--set path=v` overrides from the
/// arguments clap sees.
pub fn split_overrides(args: Vec<OsString>) -> (Vec<OsString>, Vec<String>) {
    let mut rest = Vec::new();
    let mut overrides = Vec::new();
    let mut it = args.into_iter().peekable();
    while let Some(arg) = it.next() {
        let text = arg.to_string_lossy().into_owned();
        let key = text.strip_prefix("--").map(|k| k.split('=').next().unwrap_or(k));
        match key {
            Some("set") => match text.strip_prefix("--set=") {
                Some(v) => overrides.push(v.to_string()),
                None => overrides.push(it.next().map(|v| v.to_string_lossy().into_owned()).unwrap_or_default()),
            },
            Some(k) if k.contains('.') => {
                if text.contains('=') {
                    overrides.push(text[2..].to_string());
                } else if let Some(v) = it.next_if(|v| !v.to_string_lossy().starts_with("--")) {
                    overrides.push(format!("{k}={}", v.to_string_lossy()));
                } else {
                    overrides.push(k.to_string());
                }
            }
            _ => rest.push(arg),
        }
    }
    (rest, overrides)
}

/// Parses `args` (including the program name), runs the command and
/// returns the exit code.
pub fn main_with_args(args: Vec<OsString>) -> i32 {
    let (args, overrides) = split_overrides(args);
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { crate::EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli, &overrides) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    }
}

fn load(path: &Path, overrides: &[String]) -> Result<ExperimentConfig, CliError> {
    ExperimentConfig::load(path)
        .and_then(|c| c.with_overrides(overrides))
        .map_err(CliError::config)
}

fn apply_defaults(base: ExperimentConfig, overrides: &[String]) -> Result<ExperimentConfig, CliError> {
    base.with_overrides(overrides).map_err(CliError::config)
}

pub fn execute(cli: Cli, overrides: &[String]) -> Result<(), CliError> {
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(CliError::config(anyhow!("--workers must be at least 1")));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::other(e.into()))?;
    }
    let no_overrides = |what: &str| {
        if overrides.is_empty() {
            Ok(())
        } else {
            Err(CliError::config(anyhow!("{what} takes no config overrides")))
        }
    };
    match cli.command {
        Command::Estimate(args) => {
            let cfg = load(&args.config, overrides)?;
            let dir = args.output_dir.unwrap_or_else(|| cfg.output_dir.clone());
            run_and_write(cfg, "estimate", &[ScheduleStep::Estimate], &dir).map(|_| ())
        }
        Command::Tune(args) => {
            let cfg = load(&args.config, overrides)?;
            let dir = args.output_dir.unwrap_or_else(|| cfg.output_dir.clone());
            let steps = if cfg.schedule.is_empty() {
                vec![ScheduleStep::Estimate]
            } else {
                cfg.schedule.clone()
            };
            run_and_write(cfg, "tune", &steps, &dir).map(|_| ())
        }
        Command::Curve {
            report,
            config,
            output_dir,
        } => {
            let eps_cfg = match config {
                Some(path) => Some(load(&path, overrides)?),
                None => {
                    no_overrides("curve without --config")?;
                    None
                }
            };
            let dir = output_dir.unwrap_or_else(|| report.parent().map(Path::to_path_buf).unwrap_or_default());
            curve(&report, eps_cfg.as_ref(), &dir).map(|_| ())
        }
        Command::SweepSpread { run, spreads } => {
            let mut cfg = load(&run.config, overrides)?;
            if let Some(s) = spreads {
                cfg.sweep.spreads = s;
            }
            let dir = run.output_dir.unwrap_or_else(|| cfg.output_dir.clone());
            sweep_spread(&cfg, &dir).map(|_| ())
        }
        Command::Demo { kind, output_dir } => {
            let base = match kind {
                DemoKind::Diffusive => config::diffusive_demo(),
                DemoKind::Kuramoto => config::kuramoto_demo(),
            };
            let cfg = apply_defaults(base, overrides)?;
            let dir = output_dir.unwrap_or_else(|| cfg.output_dir.clone());
            match kind {
                DemoKind::Diffusive => {
                    let steps = cfg.schedule.clone();
                    run_and_write(cfg, "demo diffusive", &steps, &dir)?;
                    curve(&dir.join("report.json"), None, &dir).map(|_| ())
                }
                DemoKind::Kuramoto => sweep_spread(&cfg, &dir).map(|_| ()),
            }
        }
        Command::InitConfig { kind } => {
            no_overrides("init-config")?;
            let cfg = match kind {
                ExampleKind::Diffusive => config::diffusive_demo(),
                ExampleKind::Kuramoto => config::kuramoto_demo(),
                ExampleKind::ScalarLinear => config::scalar_linear_example(),
            };
            println!("{}", cfg.to_pretty_json());
            Ok(())
        }
    }
}

fn show(x: Option<f64>) -> String {
    x.map_or("-".to_string(), |v| format!("{v:.6}"))
}

/// Runs `steps`, writes all run outputs to `dir` and prints a summary. An
/// integration failure is reported after the files are written.
pub fn run_and_write(
    cfg: ExperimentConfig,
    command: &str,
    steps: &[ScheduleStep],
    dir: &Path,
) -> Result<pipeline::Report, CliError> {
    let exp = Experiment::new(cfg)?;
    let run = pipeline::run(&exp, command, steps)?;
    output::write_run(dir, &exp, &run).map_err(CliError::other)?;
    let r = &run.report;
    println!("baseline d_rho      {}", show(r.baseline));
    println!("final in-sample     {}", show(r.final_in_sample));
    println!("final resampled     {}", show(r.final_resampled));
    println!("reduction factor    {}", show(r.reduction_factor));
    println!("total time          {:.1} s", run.timings.total_s);
    println!("report              {}", dir.join("report.json").display());
    match run.failure {
        Some(e) => Err(e),
        None => Ok(run.report),
    }
}

pub fn curve(
    report_path: &Path,
    cfg: Option<&ExperimentConfig>,
    dir: &Path,
) -> Result<Vec<probtune_core::EpsilonCurvePoint>, CliError> {
    let report = output::read_report(report_path).map_err(CliError::missing)?;
    let grid = cfg.map_or(&report.config.epsilons, |c| &c.epsilons);
    let eps = grid.values().map_err(CliError::config)?;
    let points = pipeline::curve_from_report(&report, &eps)?;
    std::fs::create_dir_all(dir).map_err(|e| CliError::other(e.into()))?;
    let path = dir.join("curve.csv");
    output::write_curve(&path, &points).map_err(CliError::other)?;
    if let Some(best) = points
        .iter()
        .filter(|p| p.interval().upper() <= 0.2)
        .map(|p| p.epsilon)
        .reduce(f64::min)
    {
        println!("smallest epsilon with upper bound <= 0.2: {best}");
    }
    println!("curve               {}", path.display());
    Ok(points)
}

fn spread_dir(dir: &Path, s: f64) -> PathBuf {
    dir.join(format!("s_{s}"))
}

/// Runs the configured schedule per spread; failures become rows with a
/// reason instead of aborting the sweep.
pub fn sweep_spread(cfg: &ExperimentConfig, dir: &Path) -> Result<Vec<SweepRow>, CliError> {
    if !matches!(cfg.system, FamilyConfig::Kuramoto { .. }) {
        return Err(CliError::config(anyhow!("sweep-spread needs a kuramoto system")));
    }
    if cfg.sweep.spreads.is_empty() {
        return Err(CliError::config(anyhow!("no spreads given")));
    }
    let steps = if cfg.schedule.is_empty() {
        vec![ScheduleStep::Estimate]
    } else {
        cfg.schedule.clone()
    };
    let mut rows = Vec::new();
    for &s in &cfg.sweep.spreads {
        let mut one = cfg.clone();
        if let FamilyConfig::Kuramoto { spread, .. } = &mut one.system {
            *spread = s;
        }
        one.sweep.spreads = vec![s];
        println!("spread s = {s}");
        let row = match run_and_write(one, "sweep-spread", &steps, &spread_dir(dir, s)) {
            Ok(report) => SweepRow {
                s,
                d_rho_baseline: report.baseline,
                d_rho_tuned: report.tuned_value(),
                reduction: report.reduction_factor,
                reason: if report.tuned_value().is_some() {
                    String::new()
                } else {
                    "non-finite distance".into()
                },
            },
            Err(e) if e.code == crate::EXIT_CONFIG => return Err(e),
            Err(e) => SweepRow {
                s,
                d_rho_baseline: None,
                d_rho_tuned: None,
                reduction: None,
                reason: e.to_string(),
            },
        };
        rows.push(row);
    }
    std::fs::create_dir_all(dir).map_err(|e| CliError::other(e.into()))?;
    let path = dir.join("sweep.csv");
    output::write_sweep(&path, &rows).map_err(CliError::other)?;
    println!("sweep               {}", path.display());
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn os(args: &[&str]) -> Vec<OsString> {
        args.iter().map(OsString::from).collect()
    }

    #[test]
    fn overrides_are_split_off() {
        let (rest, ov) = split_overrides(os(&[
            "probtune",
            "tune",
            "--config",
            "c.json",
            "--inputs.seed=7",
            "--grid.dt",
            "0.02",
            "--workers",
            "1",
            "--set",
            "carry_moments=true",
            "--set=epsilons=[0.1]",
        ]));
        assert_eq!(rest, os(&["probtune", "tune", "--config", "c.json", "--workers", "1"]));
        assert_eq!(
            ov,
            ["inputs.seed=7", "grid.dt=0.02", "carry_moments=true", "epsilons=[0.1]"]
        );
    }

    #[test]
    fn parses_subcommands() {
        let cli = Cli::try_parse_from(os(&["probtune", "--workers", "2", "demo", "kuramoto"])).unwrap();
        assert_eq!(cli.workers, Some(2));
        assert!(matches!(
            cli.command,
            Command::Demo {
                kind: DemoKind::Kuramoto,
                ..
            }
        ));
        let cli =
            Cli::try_parse_from(os(&["probtune", "sweep-spread", "--config", "x", "--spreads", "1,2.5"])).unwrap();
        match cli.command {
            Command::SweepSpread { spreads, .. } => assert_eq!(spreads, Some(vec![1.0, 2.5])),
            other => panic!("{other:?}"),
        }
    }
}
