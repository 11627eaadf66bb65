//! Command-line driver for the experiments.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rgsb_core::algorithms::Method;
use rgsb_core::harness::{
    emit_convergence, emit_feasibility, emit_power_sweep, emit_qos_table, run_convergence,
    run_feasibility_sweep, run_power_sweep, run_qos_table, solve_one, ExperimentConfig, Manifest,
};

/// Aborted-realization rate above which the exit code is nonzero.
const MAX_ABORT_RATE: f64 = 0.1;

#[derive(Parser)]
#[command(name = "rgsb", version, about = "Robust group-sparse beamforming experiments")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML experiment configuration; defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory override.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Target SINR grid override in dB, comma separated.
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    gamma: Option<Vec<f64>>,
    /// Realization count override for the selected experiment.
    #[arg(long, global = true)]
    realizations: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Per-user QoS satisfaction of robust and nominal designs.
    QosTable {
        /// Total test realizations.
        #[arg(long)]
        tests: Option<usize>,
        /// Test realizations per training set.
        #[arg(long)]
        retrain: Option<usize>,
    },
    /// Feasibility probability of the robust and scenario programs.
    Feasibility,
    /// Outer-loop traces of the proposed method.
    Convergence,
    /// Mean total power and task count per method.
    PowerSweep {
        /// Methods, comma separated.
        #[arg(long, value_delimiter = ',')]
        methods: Option<Vec<Method>>,
    },
    /// One method on one realization; writes the iteration CSV.
    SolveOne {
        #[arg(long, default_value = "reweighted-dc")]
        method: Method,
        /// Realization index in the solve-one stream.
        #[arg(long, default_value_t = 0)]
        index: u64,
    },
}

fn load(common: &Common) -> rgsb_core::Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(o) = &common.out {
        cfg.output_dir = o.clone();
    }
    if let Some(g) = &common.gamma {
        cfg.gamma_db = g.clone();
    }
    Ok(cfg)
}

fn report(m: &Manifest) -> ExitCode {
    let rate = m.aborted as f64 / m.attempted.max(1) as f64;
    println!("files: {}", m.files.join(", "));
    println!("config hash {} seed {} aborted {}/{}", m.config_hash, m.seed, m.aborted, m.attempted);
    if rate > MAX_ABORT_RATE {
        eprintln!("aborted-realization rate {rate:.3} exceeds {MAX_ABORT_RATE}");
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    }
}

fn run(cli: Cli) -> rgsb_core::Result<ExitCode> {
    let mut cfg = load(&cli.common)?;
    let n = cli.common.realizations;
    match cli.command {
        Command::QosTable { tests, retrain } => {
            if let Some(t) = tests.or(n) {
                cfg.qos_tests = t;
            }
            if let Some(r) = retrain {
                cfg.qos_retrain = r;
            }
            if let Some(g) = &cli.common.gamma {
                cfg.qos_gamma_db = g[0];
            }
            let table = run_qos_table(&cfg)?;
            println!("user,robust_met,nonrobust_met,completed");
            for k in 0..table.robust.len() {
                println!("{},{},{},{}", k + 1, table.robust[k], table.nonrobust[k], table.completed);
            }
            println!("infeasible {} aborted {}", table.infeasible, table.aborted);
            Ok(report(&emit_qos_table(&cfg.output_dir, &cfg, &table)?))
        }
        Command::Feasibility => {
            if let Some(r) = n {
                cfg.feasibility_realizations = r;
            }
            let points = run_feasibility_sweep(&cfg)?;
            println!("gamma_db,robust,scenario");
            for p in &points {
                println!("{},{},{}", p.gamma_db, p.robust_probability(), p.scenario_probability());
            }
            Ok(report(&emit_feasibility(&cfg.output_dir, &cfg, &points)?))
        }
        Command::Convergence => {
            let traces = run_convergence(&cfg)?;
            for t in &traces {
                match &t.report {
                    Ok(r) => {
                        let f: Vec<String> = r.trace.iter().map(|x| format!("{:.6}", x.surrogate)).collect();
                        println!("gamma {} dB: f = [{}], tasks {}", t.gamma_db, f.join(", "), r.active_groups());
                    }
                    Err(e) => println!("gamma {} dB: failed: {e}", t.gamma_db),
                }
            }
            Ok(report(&emit_convergence(&cfg.output_dir, &cfg, &traces)?))
        }
        Command::PowerSweep { methods } => {
            if let Some(r) = n {
                cfg.power_realizations = r;
            }
            if let Some(m) = methods {
                cfg.methods = m;
            }
            let sweep = run_power_sweep(&cfg)?;
            println!("gamma_db,method,mean_power,se_power,mean_tasks,runs");
            for p in &sweep.points {
                println!(
                    "{},{},{:.6},{:.6},{:.3},{}",
                    p.gamma_db, p.method, p.mean_power, p.se_power, p.mean_tasks, p.runs
                );
            }
            Ok(report(&emit_power_sweep(&cfg.output_dir, &cfg, &sweep)?))
        }
        Command::SolveOne { method, index } => {
            let gamma = cfg.gamma_db[0];
            let r = solve_one(&cfg, method, gamma, index)?;
            std::fs::create_dir_all(&cfg.output_dir)?;
            let path = cfg.output_dir.join("solve_one.csv");
            r.write_csv(std::fs::File::create(&path)?)?;
            println!(
                "{method} at {gamma} dB: total {:.6} W (transmit {:.6}, compute {:.6}), tasks {}, rank residual {:.3e}",
                r.total_power,
                r.transmit_power,
                r.compute_power,
                r.active_groups(),
                r.rank_residual
            );
            println!("wrote {}", path.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
