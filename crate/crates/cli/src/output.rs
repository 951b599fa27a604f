//! Files written by the commands. Every CSV starts with a
//! `# probtune <name> v<version>` line followed by the column header.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use probtune_core::{output_trajectory, EpsilonCurvePoint};
use serde::Serialize;

use crate::pipeline::{Experiment, Report, Run};

pub const CSV_VERSION: u32 = 1;
pub const TRAJECTORY_FILES: usize = 3;

pub struct CsvFile {
    writer: csv::Writer<BufWriter<File>>,
}

impl CsvFile {
    pub fn create(path: &Path, name: &str, header: &[String]) -> Result<Self> {
        let mut file = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
        writeln!(file, "# probtune {name} v{CSV_VERSION}")?;
        let mut writer = csv::Writer::from_writer(file);
        writer.write_record(header)?;
        Ok(Self { writer })
    }

    pub fn row(&mut self, fields: &[String]) -> Result<()> {
        self.writer.write_record(fields)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.writer.flush()?;
        Ok(())
    }
}

fn strings(cols: &[&str]) -> Vec<String> {
    cols.iter().map(|c| c.to_string()).collect()
}

/// Shortest round-trip formatting; empty for missing values.
pub fn num(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// report.json, timings.json, per_sample.csv, trajectories_k.csv and
/// loss_history.csv for a finished (or aborted) run.
pub fn write_run(dir: &Path, exp: &Experiment, run: &Run) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut written = Vec::new();
    let path = dir.join("report.json");
    write_json(&path, &run.report)?;
    written.push(path);
    let path = dir.join("timings.json");
    write_json(&path, &run.timings)?;
    written.push(path);

    let q_dim = exp.spec.model.param_dim();
    let mut header = strings(&["sample_index", "distance", "converged"]);
    header.extend((1..=q_dim).map(|k| format!("q{k}")));
    let path = dir.join("per_sample.csv");
    let mut csv = CsvFile::create(&path, "per_sample", &header)?;
    for rec in &run.report.per_sample {
        let mut fields = vec![
            rec.sample_index.to_string(),
            num(rec.distance),
            rec.converged.to_string(),
        ];
        fields.extend(rec.q.iter().map(|v| v.to_string()));
        csv.row(&fields)?;
    }
    csv.finish()?;
    written.push(path);

    for (k, (input, rec)) in run
        .per_sample_inputs
        .iter()
        .zip(&run.report.per_sample)
        .take(TRAJECTORY_FILES)
        .enumerate()
    {
        let sys = output_trajectory(exp.system.model.as_ref(), &run.per_sample_p, input, &exp.grid);
        let spec = output_trajectory(exp.spec.model.as_ref(), &rec.q, input, &exp.grid);
        let (Ok(sys), Ok(spec)) = (sys, spec) else {
            continue;
        };
        let path = dir.join(format!("trajectories_{k}.csv"));
        let mut csv = CsvFile::create(&path, "trajectories", &strings(&["t", "o_system", "o_spec"]))?;
        for (i, t) in exp.grid.times().enumerate() {
            csv.row(&[t.to_string(), sys.point(i)[0].to_string(), spec.point(i)[0].to_string()])?;
        }
        csv.finish()?;
        written.push(path);
    }

    let path = dir.join("loss_history.csv");
    let mut csv = CsvFile::create(&path, "loss_history", &strings(&["stage", "iteration", "loss"]))?;
    for (idx, rec) in &run.stage_records {
        let stage = format!("step {idx}: {}", rec.label);
        for (it, loss) in rec.history.iter().enumerate() {
            csv.row(&[
                stage.clone(),
                it.to_string(),
                num(Some(*loss).filter(|l| l.is_finite())),
            ])?;
        }
    }
    csv.finish()?;
    written.push(path);
    Ok(written)
}

pub fn write_curve(path: &Path, curve: &[EpsilonCurvePoint]) -> Result<()> {
    let header = strings(&["epsilon", "fraction", "ci_center", "ci_halfwidth"]);
    let mut csv = CsvFile::create(path, "curve", &header)?;
    for p in curve {
        csv.row(&[
            p.epsilon.to_string(),
            p.fraction.to_string(),
            p.ci_center.to_string(),
            p.ci_halfwidth.to_string(),
        ])?;
    }
    csv.finish()
}

/// One row of a spread sweep. `reason` is set when the run for this spread
/// did not produce a tuned value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub s: f64,
    pub d_rho_baseline: Option<f64>,
    pub d_rho_tuned: Option<f64>,
    pub reduction: Option<f64>,
    pub reason: String,
}

pub fn write_sweep(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let header = strings(&["s", "d_rho_tuned", "d_rho_baseline", "reduction", "reason"]);
    let mut csv = CsvFile::create(path, "sweep", &header)?;
    for r in rows {
        csv.row(&[
            r.s.to_string(),
            num(r.d_rho_tuned),
            num(r.d_rho_baseline),
            num(r.reduction),
            r.reason.clone(),
        ])?;
    }
    csv.finish()
}

pub fn read_report(path: &Path) -> Result<Report> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}
