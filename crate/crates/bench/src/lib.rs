//! Experiment driver: λ-sweeps, projected vs. joint comparisons, CSV traces
//! and SVG line plots for the `varpen` problems.

pub mod config;
pub mod error;
pub mod output;
pub mod plot;
pub mod run;

pub use config::ExperimentConfig;
pub use error::{BenchError, Result};
pub use run::{lipschitz_sweep, run, Arm, LipschitzRow, SummaryRecord, SweepSummary};
