//! Simulation harness around `fedchain-core`.
//!
//! [`simnet`] drives hospitals, the DAG ledger and secure aggregation round
//! by round. The remaining modules handle configuration, output files, DAG
//! export, key files, dataset snapshots, sweep presets and the privacy audit
//! used by the `fedchain` command-line tool.

pub mod artifacts;
pub mod audit;
pub mod config;
pub mod datafile;
pub mod export;
pub mod keyfiles;
pub mod metrics;
pub mod presets;
pub mod simnet;
pub mod sweep;

pub use config::ExperimentConfig;
pub use simnet::{run_experiment, RunOptions, RunOutput};
