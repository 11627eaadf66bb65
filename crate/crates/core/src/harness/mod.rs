//! Experiment drivers: configuration, seeded realizations, the QoS table,
//! feasibility, convergence and power sweeps, and their output files.

pub mod config;
pub mod experiments;
pub mod output;

pub use config::ExperimentConfig;
pub use experiments::{
    draw_realization, mean_se, realization, run_convergence, run_feasibility_sweep, run_power_sweep,
    run_qos_table, solve_one, stream_rng, ConvergenceTrace, Experiment, FeasibilityPoint, PowerPoint,
    PowerRun, PowerSweep, QosTable, Realization,
};
pub use output::{emit_convergence, emit_feasibility, emit_power_sweep, emit_qos_table, Manifest};
