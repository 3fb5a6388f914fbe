//! Configuration, orchestration and CSV output of the experiment suite.

mod config;
mod runner;
mod table;

pub use config::{ExperimentConfig, ExperimentKind, DEFAULT_SEED};
pub use runner::{
    run_experiment, run_mean_gain, run_oracle_check, run_saddle, run_scan_chain,
    run_scan_ergodicity, run_supnorm, CHAIN_HEADER, MC_SIGMAS, SERIES_AGREEMENT,
};
pub use table::{float, Table};
