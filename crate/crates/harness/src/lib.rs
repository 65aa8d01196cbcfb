//! Experiment harness: instance generation, brute-force reference oracles,
//! solver dispatch and reproducible metrics.

pub mod config;
pub mod generate;
pub mod oracles;
pub mod runner;

pub use config::{ExperimentConfig, GeneratorSpec, MetricsRow, ParamSpec, Task};
pub use runner::{run_experiment, Instance, RunOutput};
