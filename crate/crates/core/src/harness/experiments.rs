//! Experiment drivers. Realizations run on a rayon pool; every realization
//! owns an RNG stream derived from the master seed, and results are
//! reduced in realization order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rgsb_sdp::CMat;

use crate::algorithms::{
    baseline_nonrobust, baseline_robust_cb, feasibility_robust, feasibility_scenario, qos_counts,
    run_method, Method, RunReport,
};
use crate::channel::{
    draw_fading, generate_topology, sample_dataset, sample_with_fading, true_channel, ChannelSample, Fading,
    Topology,
};
use crate::error::{Error, Result};
use crate::harness::config::ExperimentConfig;
use crate::reform::Feasibility;
use crate::uncertainty::{build_h, learn_regions, refresh_center, UncertaintyRegion};

/// Tags separating the RNG streams of the experiments.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Experiment {
    QosTable = 1,
    Feasibility = 2,
    Convergence = 3,
    PowerSweep = 4,
    SolveOne = 5,
}

/// Counter-based stream: ChaCha keyed by the master seed, stream number
/// formed from the experiment tag and the realization index.
pub fn stream_rng(seed: u64, experiment: Experiment, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((experiment as u64) << 48) | (index & ((1 << 48) - 1)));
    rng
}

/// Topology, fading, training set and learned regions of one realization.
#[derive(Clone, Debug)]
pub struct Realization {
    pub topology: Topology,
    pub fading: Fading,
    pub dataset: Vec<ChannelSample>,
    pub regions: Vec<UncertaintyRegion>,
    /// `H_k = [h_hat_k, B_k]` per user.
    pub h: Vec<CMat>,
}

pub fn draw_realization<R: rand::Rng>(cfg: &ExperimentConfig, rng: &mut R) -> Result<Realization> {
    let topology = generate_topology(&cfg.topology, rng)?;
    let fading = draw_fading(&topology, rng);
    let dataset = sample_dataset(&topology, &fading, cfg.robust.samples, cfg.error_var, rng)?;
    let regions = learn_regions(&topology, &dataset, &cfg.robust, rng)?;
    let h = regions.iter().map(build_h).collect();
    Ok(Realization {
        topology,
        fading,
        dataset,
        regions,
        h,
    })
}

/// Draws realization `index` of an experiment.
pub fn realization(cfg: &ExperimentConfig, experiment: Experiment, index: u64) -> Result<Realization> {
    draw_realization(cfg, &mut stream_rng(cfg.seed, experiment, index))
}

/// Per-user QoS satisfaction counts of the robust and nominal designs.
#[derive(Clone, Debug, PartialEq)]
pub struct QosTable {
    pub gamma_db: f64,
    pub attempted: usize,
    /// Realizations where both designs were obtained.
    pub completed: usize,
    pub robust: Vec<usize>,
    pub nonrobust: Vec<usize>,
    /// Realizations dropped because a design program was infeasible.
    pub infeasible: usize,
    /// Realizations dropped on solver failure.
    pub aborted: usize,
}

impl QosTable {
    pub fn robust_fraction(&self, k: usize) -> f64 {
        self.robust[k] as f64 / self.completed.max(1) as f64
    }

    pub fn nonrobust_fraction(&self, k: usize) -> f64 {
        self.nonrobust[k] as f64 / self.completed.max(1) as f64
    }

    pub fn abort_rate(&self) -> f64 {
        self.aborted as f64 / self.attempted.max(1) as f64
    }
}

enum Attrition {
    Infeasible,
    Aborted,
}

fn classify(e: &Error) -> Attrition {
    match e {
        Error::Infeasible => Attrition::Infeasible,
        _ => Attrition::Aborted,
    }
}

/// Each training cycle redraws topology and fading, learns the regions from
/// `D` samples and then serves `qos_retrain` test realizations. A test
/// realization collects one fresh sample `h1`, recenters the regions on it,
/// designs the robust and nominal beamformers (all tasks at all APs) and
/// checks `SINR_k >= gamma` on the true channel of the cycle.
pub fn run_qos_table(cfg: &ExperimentConfig) -> Result<QosTable> {
    cfg.validate()?;
    let cycles = cfg.qos_tests.div_ceil(cfg.qos_retrain);
    let gamma = cfg.gamma_linear(cfg.qos_gamma_db);
    let kk = cfg.topology.n_users;
    let parts: Vec<Result<QosTable>> = (0..cycles)
        .into_par_iter()
        .map(|c| {
            let tests = cfg.qos_retrain.min(cfg.qos_tests - c * cfg.qos_retrain);
            let mut rng = stream_rng(cfg.seed, Experiment::QosTable, c as u64);
            let mut part = QosTable {
                gamma_db: cfg.qos_gamma_db,
                attempted: tests,
                completed: 0,
                robust: vec![0; kk],
                nonrobust: vec![0; kk],
                infeasible: 0,
                aborted: 0,
            };
            let real = match draw_realization(cfg, &mut rng) {
                Ok(r) => r,
                Err(_) => {
                    part.aborted = tests;
                    return Ok(part);
                }
            };
            let topo = &real.topology;
            let truth = [true_channel(topo, &real.fading)];
            for _ in 0..tests {
                let h1 = sample_with_fading(topo, &real.fading, cfg.error_var, &mut rng);
                let designs = (|| -> Result<_> {
                    let h: Vec<CMat> = real
                        .regions
                        .iter()
                        .enumerate()
                        .map(|(k, r)| refresh_center(r, h1.user(topo, k)).map(|r| build_h(&r)))
                        .collect::<Result<_>>()?;
                    let robust = baseline_robust_cb(&h, &gamma, topo, &cfg.algo)?;
                    let nominal = baseline_nonrobust(&h1, &gamma, topo, &cfg.algo)?;
                    Ok((robust, nominal))
                })();
                match designs {
                    Ok((robust, nominal)) => {
                        part.completed += 1;
                        for (k, n) in qos_counts(topo, &robust.beamformer, &truth, &gamma).into_iter().enumerate() {
                            part.robust[k] += n;
                        }
                        for (k, n) in qos_counts(topo, &nominal.beamformer, &truth, &gamma).into_iter().enumerate() {
                            part.nonrobust[k] += n;
                        }
                    }
                    Err(e) => match classify(&e) {
                        Attrition::Infeasible => part.infeasible += 1,
                        Attrition::Aborted => part.aborted += 1,
                    },
                }
            }
            Ok(part)
        })
        .collect();
    let mut total = QosTable {
        gamma_db: cfg.qos_gamma_db,
        attempted: 0,
        completed: 0,
        robust: vec![0; kk],
        nonrobust: vec![0; kk],
        infeasible: 0,
        aborted: 0,
    };
    for part in parts {
        let part = part?;
        total.attempted += part.attempted;
        total.completed += part.completed;
        total.infeasible += part.infeasible;
        total.aborted += part.aborted;
        for k in 0..kk {
            total.robust[k] += part.robust[k];
            total.nonrobust[k] += part.nonrobust[k];
        }
    }
    Ok(total)
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeasibilityPoint {
    pub gamma_db: f64,
    pub realizations: usize,
    pub robust_feasible: usize,
    pub scenario_feasible: usize,
    /// Realizations dropped at this point on solver failure.
    pub aborted: usize,
}

impl FeasibilityPoint {
    pub fn robust_probability(&self) -> f64 {
        self.robust_feasible as f64 / (self.realizations - self.aborted).max(1) as f64
    }

    pub fn scenario_probability(&self) -> f64 {
        self.scenario_feasible as f64 / (self.realizations - self.aborted).max(1) as f64
    }
}

/// Robust and scenario feasibility on the same data set per realization,
/// for every grid point.
pub fn run_feasibility_sweep(cfg: &ExperimentConfig) -> Result<Vec<FeasibilityPoint>> {
    cfg.validate()?;
    let per_real: Vec<Vec<Option<(bool, bool)>>> = (0..cfg.feasibility_realizations)
        .into_par_iter()
        .map(|r| {
            let Ok(real) = realization(cfg, Experiment::Feasibility, r as u64) else {
                return vec![None; cfg.gamma_db.len()];
            };
            cfg.gamma_db
                .iter()
                .map(|&db| {
                    let gamma = cfg.gamma_linear(db);
                    let robust = feasibility_robust(&real.h, &gamma, &real.topology).ok()?;
                    let scenario = feasibility_scenario(&real.dataset, &gamma, &real.topology).ok()?;
                    Some((robust == Feasibility::Feasible, scenario == Feasibility::Feasible))
                })
                .collect()
        })
        .collect();
    Ok(cfg
        .gamma_db
        .iter()
        .enumerate()
        .map(|(i, &db)| {
            let mut p = FeasibilityPoint {
                gamma_db: db,
                realizations: cfg.feasibility_realizations,
                robust_feasible: 0,
                scenario_feasible: 0,
                aborted: 0,
            };
            for row in &per_real {
                match row[i] {
                    Some((r, s)) => {
                        p.robust_feasible += r as usize;
                        p.scenario_feasible += s as usize;
                    }
                    None => p.aborted += 1,
                }
            }
            p
        })
        .collect())
}

/// Outer-loop trace of the proposed method at one target SINR.
#[derive(Clone, Debug)]
pub struct ConvergenceTrace {
    pub gamma_db: f64,
    pub report: std::result::Result<RunReport, String>,
}

/// One realization, the proposed method at every grid point.
pub fn run_convergence(cfg: &ExperimentConfig) -> Result<Vec<ConvergenceTrace>> {
    cfg.validate()?;
    let real = realization(cfg, Experiment::Convergence, 0)?;
    Ok(cfg
        .gamma_db
        .par_iter()
        .map(|&db| ConvergenceTrace {
            gamma_db: db,
            report: run_method(Method::ReweightedDc, &real.h, &cfg.gamma_linear(db), &real.topology, &cfg.algo)
                .map_err(|e| e.to_string()),
        })
        .collect())
}

#[derive(Clone, Debug)]
pub struct PowerRun {
    pub realization: usize,
    pub gamma_db: f64,
    pub method: Method,
    pub report: std::result::Result<RunReport, String>,
}

/// Mean and standard error over the realizations where every method
/// produced a design at this grid point.
#[derive(Clone, Debug, PartialEq)]
pub struct PowerPoint {
    pub gamma_db: f64,
    pub method: Method,
    pub runs: usize,
    /// Realizations excluded at this grid point.
    pub attrition: usize,
    pub mean_power: f64,
    pub se_power: f64,
    pub mean_tasks: f64,
    pub se_tasks: f64,
}

#[derive(Clone, Debug)]
pub struct PowerSweep {
    pub points: Vec<PowerPoint>,
    pub runs: Vec<PowerRun>,
}

impl PowerSweep {
    pub fn point(&self, gamma_db: f64, method: Method) -> Option<&PowerPoint> {
        self.points.iter().find(|p| p.gamma_db == gamma_db && p.method == method)
    }

    /// Fraction of realizations dropped anywhere in the sweep.
    pub fn abort_rate(&self) -> f64 {
        let failed = self.runs.iter().filter(|r| r.report.is_err()).count();
        failed as f64 / self.runs.len().max(1) as f64
    }
}

/// Sample mean and standard error of the mean.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Every method on the same realizations and grid.
pub fn run_power_sweep(cfg: &ExperimentConfig) -> Result<PowerSweep> {
    cfg.validate()?;
    let nested: Vec<Vec<PowerRun>> = (0..cfg.power_realizations)
        .into_par_iter()
        .map(|r| {
            let real = realization(cfg, Experiment::PowerSweep, r as u64).map_err(|e| e.to_string());
            let mut out = Vec::new();
            for &db in &cfg.gamma_db {
                for &method in &cfg.methods {
                    let report = match &real {
                        Ok(real) => run_method(method, &real.h, &cfg.gamma_linear(db), &real.topology, &cfg.algo)
                            .map_err(|e| e.to_string()),
                        Err(e) => Err(e.clone()),
                    };
                    out.push(PowerRun {
                        realization: r,
                        gamma_db: db,
                        method,
                        report,
                    });
                }
            }
            out
        })
        .collect();
    let runs: Vec<PowerRun> = nested.into_iter().flatten().collect();
    let mut points = Vec::new();
    for &db in &cfg.gamma_db {
        let complete: Vec<usize> = (0..cfg.power_realizations)
            .filter(|&r| runs.iter().filter(|x| x.realization == r && x.gamma_db == db).all(|x| x.report.is_ok()))
            .collect();
        for &method in &cfg.methods {
            let chosen: Vec<&RunReport> = runs
                .iter()
                .filter(|x| x.gamma_db == db && x.method == method && complete.contains(&x.realization))
                .filter_map(|x| x.report.as_ref().ok())
                .collect();
            let power: Vec<f64> = chosen.iter().map(|r| r.total_power).collect();
            let tasks: Vec<f64> = chosen.iter().map(|r| r.active_groups() as f64).collect();
            let (mean_power, se_power) = mean_se(&power);
            let (mean_tasks, se_tasks) = mean_se(&tasks);
            points.push(PowerPoint {
                gamma_db: db,
                method,
                runs: chosen.len(),
                attrition: cfg.power_realizations - complete.len(),
                mean_power,
                se_power,
                mean_tasks,
                se_tasks,
            });
        }
    }
    Ok(PowerSweep { points, runs })
}

/// A single method on realization `index` of the solve-one stream.
pub fn solve_one(cfg: &ExperimentConfig, method: Method, gamma_db: f64, index: u64) -> Result<RunReport> {
    cfg.validate()?;
    let real = realization(cfg, Experiment::SolveOne, index)?;
    run_method(method, &real.h, &cfg.gamma_linear(gamma_db), &real.topology, &cfg.algo)
}
