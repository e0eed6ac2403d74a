//! Experiment orchestration, config parsing, CSV/SVG emission, and the
//! acceptance-suite runner behind the CLI.

pub mod acceptance;
pub mod config;
pub mod experiments;
pub mod plot;

pub use config::{load_space_and_target, KvMap};
pub use experiments::{run_experiment, ExperimentResult, ExperimentSpec, ExperimentTag};
