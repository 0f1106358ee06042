//! Experiment runner: configs, CSV ingestion, grid sweeps, timing and plots.

pub mod config;
pub mod ingest;
pub mod plot;
pub mod run;
pub mod timing;

pub use config::{ExperimentConfig, Mode, Sigma2Rule};
pub use ingest::{ingest_csv, load_table};
pub use plot::emit_plots;
pub use run::{run_experiment, ResultRow, ResultTable};
pub use timing::{time_comparison, TimingConfig, TimingRow};
