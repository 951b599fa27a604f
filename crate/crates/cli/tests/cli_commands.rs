use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use probtune_cli::config::{
    scalar_linear_example, ExperimentConfig, FamilyConfig, GridConfig, ScheduleStep, StageConfig,
};
use probtune_cli::pipeline::Report;
use probtune_core::OptimizerKind;
use tempfile::TempDir;

fn probtune(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_probtune"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, cfg: &ExperimentConfig) -> String {
    let path = dir.join("config.json");
    fs::write(&path, cfg.to_pretty_json()).unwrap();
    path.to_string_lossy().into_owned()
}

fn read_report(dir: &Path) -> Report {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

fn small_diffusive() -> ExperimentConfig {
    let mut cfg = probtune_cli::config::diffusive_demo();
    cfg.system = FamilyConfig::Diffusive {
        n: 5,
        m: 2,
        graph_seed: 11,
    };
    cfg.grid = GridConfig { t_final: 3.0, dt: 0.02 };
    cfg.inputs.n_samples = 4;
    cfg.schedule = vec![
        ScheduleStep::Estimate,
        ScheduleStep::Tune {
            stages: vec![
                StageConfig::new(OptimizerKind::Adam, 10),
                StageConfig::new(OptimizerKind::Amsgrad, 10),
            ],
            repetitions: 1,
        },
        ScheduleStep::Reestimate,
        ScheduleStep::Resample {
            n_samples: 5,
            seed: None,
            adopt: false,
        },
    ];
    cfg
}

fn small_kuramoto(spread: f64) -> ExperimentConfig {
    let mut cfg = probtune_cli::config::kuramoto_demo();
    cfg.system = FamilyConfig::Kuramoto {
        n: 4,
        coupling: 1.0,
        spread,
        omega_seed: 42,
        pair_range: Default::default(),
        tunable_frequencies: false,
    };
    cfg.grid = GridConfig { t_final: 4.0, dt: 0.02 };
    cfg.distance.transient_cutoff = 1.0;
    cfg.inputs.n_samples = 3;
    cfg.schedule = vec![
        ScheduleStep::Estimate,
        ScheduleStep::Tune {
            stages: vec![StageConfig::new(OptimizerKind::Adam, 5)],
            repetitions: 1,
        },
        ScheduleStep::Resample {
            n_samples: 3,
            seed: None,
            adopt: false,
        },
    ];
    cfg
}

#[test]
fn init_config_prints_loadable_configs() {
    for kind in ["diffusive", "kuramoto", "scalar-linear"] {
        let out = probtune(&["init-config", kind]);
        assert!(out.status.success());
        ExperimentConfig::from_json(std::str::from_utf8(&out.stdout).unwrap()).unwrap();
    }
}

#[test]
fn scalar_linear_estimate_is_zero_and_writes_outputs() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), &scalar_linear_example());
    let out_dir = tmp.path().join("out");
    let out = probtune(&["estimate", "--config", &cfg, "--output-dir", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = read_report(&out_dir);
    assert!(report.final_in_sample.unwrap() <= 1e-6);
    assert_eq!(report.steps.len(), 1);
    let per_sample = fs::read_to_string(out_dir.join("per_sample.csv")).unwrap();
    let mut lines = per_sample.lines();
    assert_eq!(lines.next(), Some("# probtune per_sample v1"));
    assert_eq!(lines.next(), Some("sample_index,distance,converged,q1"));
    assert_eq!(lines.count(), 10);
    for k in 0..3 {
        let traj = fs::read_to_string(out_dir.join(format!("trajectories_{k}.csv"))).unwrap();
        let mut lines = traj.lines();
        assert_eq!(lines.next(), Some("# probtune trajectories v1"));
        assert_eq!(lines.next(), Some("t,o_system,o_spec"));
        assert_eq!(lines.count(), 501);
    }
    assert!(!out_dir.join("trajectories_3.csv").exists());
    let timings: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("timings.json")).unwrap()).unwrap();
    assert!(timings["total_s"].as_f64().unwrap() >= 0.0);
}

#[test]
fn single_worker_runs_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), &small_diffusive());
    let mut reports = Vec::new();
    for (k, workers) in ["1", "1", "3"].iter().enumerate() {
        let dir = tmp.path().join(format!("run{k}"));
        let out = probtune(&[
            "--workers",
            workers,
            "tune",
            "--config",
            &cfg,
            "--output-dir",
            dir.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let files: Vec<Vec<u8>> = [
            "report.json",
            "per_sample.csv",
            "loss_history.csv",
            "trajectories_0.csv",
        ]
        .iter()
        .map(|f| fs::read(dir.join(f)).unwrap())
        .collect();
        reports.push(files);
    }
    assert_eq!(reports[0], reports[1]);
    assert_eq!(reports[0], reports[2]);
}

#[test]
fn tune_report_has_the_schedule_rows() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), &small_diffusive());
    let dir = tmp.path().join("out");
    let out = probtune(&[
        "tune",
        "--config",
        &cfg,
        "--output-dir",
        dir.to_str().unwrap(),
        "--inputs.seed=5",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = read_report(&dir);
    assert_eq!(r.config.inputs.seed, 5);
    assert_eq!(r.seeds.resamples, vec![6]);
    let kinds: Vec<&str> = r.steps.iter().map(|s| s.step.as_str()).collect();
    assert_eq!(kinds, ["estimate", "tune", "reestimate", "resample"]);
    assert!(r.steps[1].d_after.unwrap() < r.steps[0].d_after.unwrap());
    assert!(r.steps[2].d_after.unwrap() <= r.steps[1].d_after.unwrap());
    assert_eq!(r.final_resampled, r.steps[3].d_after);
    assert_eq!(r.stages.len(), 2);
    let history = fs::read_to_string(dir.join("loss_history.csv")).unwrap();
    assert_eq!(history.lines().nth(1), Some("stage,iteration,loss"));
    assert!(history.lines().count() > 2 + 10);
}

#[test]
fn empty_schedule_reports_only_the_baseline() {
    let tmp = TempDir::new().unwrap();
    let mut cfg = small_diffusive();
    cfg.schedule.clear();
    let cfg = write_config(tmp.path(), &cfg);
    let dir = tmp.path().join("out");
    let out = probtune(&["tune", "--config", &cfg, "--output-dir", dir.to_str().unwrap()]);
    assert!(out.status.success());
    let r = read_report(&dir);
    assert_eq!(r.steps.len(), 1);
    assert_eq!(r.steps[0].step, "estimate");
    assert!(r.stages.is_empty());
    assert_eq!(r.p_tuned, r.initial_p);
}

#[test]
fn config_errors_exit_with_2() {
    let tmp = TempDir::new().unwrap();
    let bad = tmp.path().join("bad.json");
    fs::write(&bad, "{ not json").unwrap();
    assert_eq!(
        probtune(&["estimate", "--config", bad.to_str().unwrap()]).status.code(),
        Some(2)
    );
    let mut v = serde_json::to_value(scalar_linear_example()).unwrap();
    v["inputs"]["colour"] = serde_json::Value::from(1);
    fs::write(&bad, v.to_string()).unwrap();
    assert_eq!(
        probtune(&["estimate", "--config", bad.to_str().unwrap()]).status.code(),
        Some(2)
    );
    let cfg = write_config(tmp.path(), &scalar_linear_example());
    assert_eq!(
        probtune(&["estimate", "--config", &cfg, "--distance.transient_cutoff=9"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        probtune(&["estimate", "--config", &cfg, "--workers", "0"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(probtune(&["estimate"]).status.code(), Some(2));
    assert_eq!(probtune(&["sweep-spread", "--config", &cfg]).status.code(), Some(2));
}

#[test]
fn diverging_integrations_exit_with_3_after_writing_the_report() {
    let tmp = TempDir::new().unwrap();
    let mut cfg = small_diffusive();
    cfg.inputs.amplitude_sigma = Some(1e4);
    cfg.initial_params.seed = None;
    cfg.initial_params.values = Some(vec![1e3; 5]);
    let cfg = write_config(tmp.path(), &cfg);
    let dir = tmp.path().join("out");
    let out = probtune(&["tune", "--config", &cfg, "--output-dir", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    let r = read_report(&dir);
    assert_eq!(r.status, "integration-failure");
    assert_eq!(r.steps.len(), 1);
    assert!(r.steps[0].failed_fits > 0);
    assert!(r.per_sample.iter().any(|s| s.distance.is_none()));
}

#[test]
fn curve_from_a_report() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), &scalar_linear_example());
    let dir = tmp.path().join("out");
    assert!(
        probtune(&["estimate", "--config", &cfg, "--output-dir", dir.to_str().unwrap()])
            .status
            .success()
    );
    let report = dir.join("report.json");
    let out = probtune(&["curve", "--report", report.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let curve = fs::read_to_string(dir.join("curve.csv")).unwrap();
    let lines: Vec<&str> = curve.lines().collect();
    assert_eq!(lines[0], "# probtune curve v1");
    assert_eq!(lines[1], "epsilon,fraction,ci_center,ci_halfwidth");
    assert_eq!(lines.len(), 2 + 3);
    for line in &lines[2..] {
        assert_eq!(line.split(',').nth(1), Some("0"));
    }

    // another epsilon grid via a config, written elsewhere
    let other = tmp.path().join("curve2");
    let out = probtune(&[
        "curve",
        "--report",
        report.to_str().unwrap(),
        "--config",
        &cfg,
        "--set",
        "epsilons=[0.5]",
        "--output-dir",
        other.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read_to_string(other.join("curve.csv")).unwrap().lines().count(), 3);
}

#[test]
fn curve_without_distances_exits_with_4() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), &scalar_linear_example());
    let dir = tmp.path().join("out");
    assert!(
        probtune(&["estimate", "--config", &cfg, "--output-dir", dir.to_str().unwrap()])
            .status
            .success()
    );
    let path = dir.join("report.json");
    let mut v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    v.as_object_mut().unwrap().remove("per_sample");
    fs::write(&path, v.to_string()).unwrap();
    assert_eq!(
        probtune(&["curve", "--report", path.to_str().unwrap()]).status.code(),
        Some(4)
    );
    let missing = tmp.path().join("nope.json");
    assert_eq!(
        probtune(&["curve", "--report", missing.to_str().unwrap()])
            .status
            .code(),
        Some(4)
    );
}

#[test]
fn unsynchronized_kuramoto_estimate_completes() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), &small_kuramoto(4.5));
    let dir = tmp.path().join("out");
    let out = probtune(&["estimate", "--config", &cfg, "--output-dir", dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = read_report(&dir);
    let row = &r.steps[0];
    assert_eq!(row.failed_fits, 0);
    assert!(row.d_after.unwrap().is_finite());
    assert_eq!(row.flags.is_empty(), row.nonconverged_fits == 0);
    assert_eq!(r.system.omegas.as_ref().unwrap().len(), 4);
    assert_eq!(r.system.pairs.as_ref().unwrap().len(), 6);
}

#[test]
fn spread_sweep_rows_are_reproducible() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), &small_kuramoto(1.0));
    let mut sweeps = Vec::new();
    for k in 0..2 {
        let dir = tmp.path().join(format!("sweep{k}"));
        let out = probtune(&[
            "--workers",
            "1",
            "sweep-spread",
            "--config",
            &cfg,
            "--spreads",
            "1.2,4.5",
            "--output-dir",
            dir.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        assert!(dir.join("s_1.2").join("report.json").exists());
        sweeps.push(fs::read_to_string(dir.join("sweep.csv")).unwrap());
    }
    assert_eq!(sweeps[0], sweeps[1]);
    let lines: Vec<&str> = sweeps[0].lines().collect();
    assert_eq!(lines[1], "s,d_rho_tuned,d_rho_baseline,reduction,reason");
    assert_eq!(lines.len(), 4);
    assert!(lines[2].starts_with("1.2,"));

    let dir = tmp.path().join("single");
    let out = probtune(&[
        "sweep-spread",
        "--config",
        &cfg,
        "--spreads",
        "2",
        "--output-dir",
        dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert_eq!(fs::read_to_string(dir.join("sweep.csv")).unwrap().lines().count(), 3);
}
