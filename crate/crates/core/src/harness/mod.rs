//! Configuration, experiment orchestration and report emission.

mod config;
mod exec;
mod experiment;
pub mod grammar;
mod lower_bound;
mod report;
mod sweep;

pub use config::{EtaSpec, ExperimentConfig, Format, SweepAxes};
pub use exec::{map_trials, Execution};
pub use experiment::{resolve, run_experiment, run_trial, Resolved, RunRecord, TrialRecord};
pub use lower_bound::{
    run_lower_bound, Learner, LowerBoundParams, LowerBoundSummary, LowerBoundTrial,
};
pub use report::{emit_report, write_report};
pub use sweep::{expand_sweep, run_sweep, write_sweep, SweepPoint, SweepRow};
