//! Metrics and the comparative experiment driver.

pub mod experiment;
pub mod metrics;

pub use experiment::{evaluate_run, run_experiment, ExperimentConfig, ExperimentResult, GridCell, RunMetrics, RunRecord};
pub use metrics::{auc_score, f1_score, Averaging};
