//! Configuration, experiment orchestration, event-file analysis and
//! reports.

pub mod analyze;
pub mod config;
pub mod report;
pub mod run;
pub mod selftest;

pub use analyze::{analyze_events, compare_events, AnalysisReport, CompareReport};
pub use config::{parse_config, ExperimentConfig};
pub use report::RunReport;
pub use run::{build_experiment, run_experiment, Experiment, RunArtifacts, RunMode};
