//! Experiment harness for the `explore-core` agents.
//!
//! An experiment is a TOML file naming an environment, an agent, an
//! exploration schedule and a run length. [`runner::run_experiment`] trains
//! one agent per seed, writes per-episode CSVs and checkpoints, and
//! aggregates them into episode curves and a one-row summary.

pub mod agent;
pub mod checkpoint;
pub mod config;
pub mod error;
pub mod metrics;
pub mod runner;

pub use agent::{AgentConfig, AgentState, AnyAgent};
pub use checkpoint::{Checkpoint, CheckpointError};
pub use config::ExperimentConfig;
pub use error::{BenchError, Result};
pub use metrics::{EpisodeAggregate, EpisodeRow, RunMetrics, Summary};
pub use runner::{run_experiment, run_seed, RunResult};
