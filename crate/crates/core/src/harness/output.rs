//! CSV, columnar plot data and run manifests.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::algorithms::Method;
use crate::error::{Error, Result};
use crate::harness::config::ExperimentConfig;
use crate::harness::experiments::{ConvergenceTrace, FeasibilityPoint, PowerSweep, QosTable};

#[derive(Clone, Debug, Serialize)]
pub struct Manifest {
    pub experiment: String,
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
    pub files: Vec<String>,
    pub aborted: usize,
    pub attempted: usize,
}

fn prepare(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    if !dir.is_dir() {
        return Err(Error::Config(format!("{} is not a directory", dir.display())));
    }
    Ok(())
}

fn writer(dir: &Path, name: &str, files: &mut Vec<String>) -> Result<csv::Writer<fs::File>> {
    files.push(name.to_string());
    Ok(csv::Writer::from_path(dir.join(name))?)
}

fn num(x: f64) -> String {
    format!("{x}")
}

fn write_manifest(dir: &Path, manifest: &Manifest) -> Result<PathBuf> {
    let path = dir.join(format!("{}_manifest.json", manifest.experiment));
    let text = serde_json::to_string_pretty(manifest).map_err(|e| Error::Config(e.to_string()))?;
    fs::write(&path, text + "\n")?;
    Ok(path)
}

fn manifest(cfg: &ExperimentConfig, experiment: &str, files: Vec<String>, aborted: usize, attempted: usize) -> Manifest {
    Manifest {
        experiment: experiment.into(),
        config_hash: cfg.hash(),
        seed: cfg.seed,
        version: env!("CARGO_PKG_VERSION").into(),
        files,
        aborted,
        attempted,
    }
}

pub fn emit_qos_table(dir: &Path, cfg: &ExperimentConfig, table: &QosTable) -> Result<Manifest> {
    prepare(dir)?;
    let mut files = Vec::new();
    let mut w = writer(dir, "qos_table.csv", &mut files)?;
    w.write_record([
        "user",
        "robust_met",
        "nonrobust_met",
        "completed",
        "robust_fraction",
        "nonrobust_fraction",
        "infeasible",
        "aborted",
    ])?;
    for k in 0..table.robust.len() {
        w.write_record([
            (k + 1).to_string(),
            table.robust[k].to_string(),
            table.nonrobust[k].to_string(),
            table.completed.to_string(),
            num(table.robust_fraction(k)),
            num(table.nonrobust_fraction(k)),
            table.infeasible.to_string(),
            table.aborted.to_string(),
        ])?;
    }
    w.flush()?;
    let m = manifest(cfg, "qos_table", files, table.aborted, table.attempted);
    write_manifest(dir, &m)?;
    Ok(m)
}

pub fn emit_feasibility(dir: &Path, cfg: &ExperimentConfig, points: &[FeasibilityPoint]) -> Result<Manifest> {
    prepare(dir)?;
    let mut files = Vec::new();
    let mut w = writer(dir, "feasibility.csv", &mut files)?;
    w.write_record(["gamma_db", "robust", "scenario", "realizations", "aborted"])?;
    for p in points {
        w.write_record([
            num(p.gamma_db),
            num(p.robust_probability()),
            num(p.scenario_probability()),
            p.realizations.to_string(),
            p.aborted.to_string(),
        ])?;
    }
    w.flush()?;
    let aborted = points.iter().map(|p| p.aborted).sum();
    let attempted = points.iter().map(|p| p.realizations).sum();
    let m = manifest(cfg, "feasibility", files, aborted, attempted);
    write_manifest(dir, &m)?;
    Ok(m)
}

/// Long-form traces plus two columnar files (x = outer iteration, one
/// column per target SINR; shorter traces leave trailing cells empty).
pub fn emit_convergence(dir: &Path, cfg: &ExperimentConfig, traces: &[ConvergenceTrace]) -> Result<Manifest> {
    prepare(dir)?;
    let mut files = Vec::new();
    let mut w = writer(dir, "convergence.csv", &mut files)?;
    w.write_record(["gamma_db", "iteration", "surrogate", "active_groups", "rank_residual", "inner_solves"])?;
    for t in traces {
        if let Ok(r) = &t.report {
            for rec in &r.trace {
                w.write_record([
                    num(t.gamma_db),
                    rec.iteration.to_string(),
                    num(rec.surrogate),
                    rec.active_groups.to_string(),
                    num(rec.rank_residual),
                    rec.inner_solves.to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    let len = traces
        .iter()
        .filter_map(|t| t.report.as_ref().ok().map(|r| r.trace.len()))
        .max()
        .unwrap_or(0);
    for (name, pick) in [
        ("convergence_surrogate.csv", 0usize),
        ("convergence_tasks.csv", 1usize),
    ] {
        let mut w = writer(dir, name, &mut files)?;
        let mut header = vec!["iteration".to_string()];
        header.extend(traces.iter().map(|t| format!("gamma_{}db", t.gamma_db)));
        w.write_record(&header)?;
        for i in 0..len {
            let mut row = vec![(i + 1).to_string()];
            for t in traces {
                let cell = t.report.as_ref().ok().and_then(|r| r.trace.get(i)).map(|rec| {
                    if pick == 0 {
                        num(rec.surrogate)
                    } else {
                        rec.active_groups.to_string()
                    }
                });
                row.push(cell.unwrap_or_default());
            }
            w.write_record(&row)?;
        }
        w.flush()?;
    }
    let aborted = traces.iter().filter(|t| t.report.is_err()).count();
    let m = manifest(cfg, "convergence", files, aborted, traces.len());
    write_manifest(dir, &m)?;
    Ok(m)
}

/// `power_sweep.csv` and `tasks_sweep.csv` are columnar (x = gamma in dB,
/// one column per method); `power_sweep_stats.csv` carries standard errors
/// and attrition.
pub fn emit_power_sweep(dir: &Path, cfg: &ExperimentConfig, sweep: &PowerSweep) -> Result<Manifest> {
    prepare(dir)?;
    let mut files = Vec::new();
    let methods: &[Method] = &cfg.methods;
    for (name, power) in [("power_sweep.csv", true), ("tasks_sweep.csv", false)] {
        let mut w = writer(dir, name, &mut files)?;
        let mut header = vec!["gamma_db".to_string()];
        header.extend(methods.iter().map(|m| m.name().to_string()));
        w.write_record(&header)?;
        for &db in &cfg.gamma_db {
            let mut row = vec![num(db)];
            for &m in methods {
                let p = sweep.point(db, m);
                row.push(p.map(|p| num(if power { p.mean_power } else { p.mean_tasks })).unwrap_or_default());
            }
            w.write_record(&row)?;
        }
        w.flush()?;
    }
    let mut w = writer(dir, "power_sweep_stats.csv", &mut files)?;
    w.write_record([
        "gamma_db",
        "method",
        "mean_power",
        "se_power",
        "mean_tasks",
        "se_tasks",
        "runs",
        "attrition",
    ])?;
    for p in &sweep.points {
        w.write_record([
            num(p.gamma_db),
            p.method.name().to_string(),
            num(p.mean_power),
            num(p.se_power),
            num(p.mean_tasks),
            num(p.se_tasks),
            p.runs.to_string(),
            p.attrition.to_string(),
        ])?;
    }
    w.flush()?;
    let aborted = sweep.runs.iter().filter(|r| r.report.is_err()).count();
    let m = manifest(cfg, "power_sweep", files, aborted, sweep.runs.len());
    write_manifest(dir, &m)?;
    Ok(m)
}
