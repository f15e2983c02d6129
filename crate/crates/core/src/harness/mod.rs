//! Experiment configurations, runners and report output.

pub mod config;
pub mod experiments;
pub mod report;

pub use config::{AnalyticField, ExperimentConfig, GridConfig, ProblemConfig, SweepConfig, SweepParameter, Tolerances};
pub use experiments::{builtin, load_solution, run_experiment, ExperimentReport, MapSummary, RunRecord, BUILTIN};
pub use report::{emit_report, write_csv, Format};
