//! Experiment harness binding the core laboratory into reproducible,
//! CSV-reported studies.

pub mod config;
pub mod experiments;
pub mod report;

pub use config::{ExperimentConfig, ExperimentKind};
pub use experiments::run_experiment;
pub use report::{ExperimentReport, Verdict};
