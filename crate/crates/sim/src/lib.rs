//! Scenario runner for `dam-core`: TOML scenario files in, long-format CSV
//! results out.
//!
//! A scenario is one of three kinds. `spectral_efficiency` sweeps transmit
//! power, path count or array size and records the sum spectral efficiency of
//! each scheme and beamformer. `rate_region` traces Pareto boundary points
//! over a grid of rate profiles. `papr` collects per-trial PAPR samples and
//! their CCDF.

pub mod config;
pub mod runner;

pub use config::{ConfigError, ScenarioConfig};
pub use runner::{run_experiment, run_scenario, write_output, Row, ScenarioOutput};
