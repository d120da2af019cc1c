//! Versioned JSON checkpoints of a trained agent.

use std::path::Path;

use explore_core::envs::EnvConfig;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{AgentState, AnyAgent};

pub const FORMAT: &str = "explore-bench-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("cannot read checkpoint {path}: {reason}")]
    Io { path: String, reason: String },
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
    #[error("checkpoint version {found} is not supported (expected {expected})")]
    Version { found: u64, expected: u32 },
    #[error("invalid checkpoint contents: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub experiment: String,
    pub seed: u64,
    pub reward_scale: f64,
    pub env: EnvConfig,
    pub agent: AgentState,
}

impl Checkpoint {
    pub fn new(experiment: &str, seed: u64, reward_scale: f64, env: EnvConfig, agent: &AnyAgent) -> Self {
        Checkpoint {
            format: FORMAT.to_string(),
            version: VERSION,
            experiment: experiment.to_string(),
            seed,
            reward_scale,
            env,
            agent: agent.state(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoints always serialize")
    }

    /// Parses and validates a checkpoint. The version is checked before the
    /// body is interpreted, so a future format reports a version error
    /// rather than a parse error.
    pub fn from_json(text: &str) -> Result<Self, CheckpointError> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| CheckpointError::Corrupt(e.to_string()))?;
        if value.get("format").and_then(|f| f.as_str()) != Some(FORMAT) {
            return Err(CheckpointError::Corrupt(format!("missing `format: {FORMAT}` header")));
        }
        let found = value
            .get("version")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| CheckpointError::Corrupt("missing version".into()))?;
        if found != u64::from(VERSION) {
            return Err(CheckpointError::Version {
                found,
                expected: VERSION,
            });
        }
        serde_json::from_value(value).map_err(|e| CheckpointError::Corrupt(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        std::fs::write(path, self.to_json()).map_err(|e| CheckpointError::Io {
            path: path.display().to_string(),
            reason: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        let text = std::fs::read_to_string(path).map_err(|e| CheckpointError::Io {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        Self::from_json(&text)
    }

    pub fn restore_agent(&self) -> Result<AnyAgent, CheckpointError> {
        AnyAgent::from_state(self.agent.clone()).map_err(|e| CheckpointError::Invalid(e.to_string()))
    }
}
