//! Experiment harness for the `dualavg` optimizers.
//!
//! An [`ExperimentConfig`] is resolved from defaults, a `key=value` file and
//! overrides; [`run_experiment`] fans replications out over a worker pool
//! and aggregates them into a [`ResultTable`], which is written as
//! `results.csv` next to a `convergence.svg` plot.

pub mod config;
pub mod error;
pub mod experiment;
pub mod plot;
pub mod table;

pub use config::{parse_pairs, ExperimentConfig, ExperimentKind, RegularizerChoice, ScheduleKind};
pub use error::{HarnessError, Result};
pub use experiment::{
    execute, log_grid, replication_seed, run_experiment, worker_count, write_outputs, InvariantReport, Outcome,
    TimingRow, NORMLOWER_TOL,
};
pub use plot::{emit_plot, render_svg};
pub use table::{emit_csv, mean_stderr, read_csv, ResultRow, ResultTable, RowContext};
