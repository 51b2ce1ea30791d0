//! Configuration-driven experiments for micro-macro MCMC: table
//! precomputation, replicated sampling runs, efficiency comparisons and
//! parameter sweeps.

pub mod config;
pub mod experiment;
pub mod expr;

pub use config::{ExperimentConfig, Resolved, TablesSource};
pub use experiment::{
    cmd_compare, cmd_precompute, cmd_sweep, compare, run_sample, write_report, GainRow, RunReport, TableCache,
};
