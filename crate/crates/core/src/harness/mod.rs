//! Seeded experiments, sweeps, oracle reports and CSV output.

mod config;
pub mod figures;
pub mod gradcheck;
pub mod output;
mod run;

pub use config::{DeskOverrides, ExperimentConfig, Metric, SweepParam, SweepSpec};
pub use run::{
    cell_name, compare_with_oracle, matched_alignment, median, oracle_batches, run_experiment,
    run_sweep, ExperimentResult, OracleReport, OracleSubspace, RepeatResult, RepeatSummary,
    SweepCell, SweepResult, TrajectoryRecord,
};
