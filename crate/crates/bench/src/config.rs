//! Experiment files: one TOML document per experiment.
//!
//! ```toml
//! name = "cliff_budget30_explvalues"
//! n_episodes = 50
//! n_seeds = 100
//!
//! [env]
//! name = "cliff"
//! slip_prob = 0.01
//!
//! [agent]
//! kind = "explvalues"
//! learning_rate = 0.1
//!
//! [schedule]
//! kind = "budget_stop"
//! budget = 30
//! ```

use std::path::{Path, PathBuf};

use explore_core::control::KappaSchedule;
use explore_core::envs::EnvConfig;
use explore_core::RunRngs;
use serde::{Deserialize, Serialize};

use crate::agent::AgentConfig;
use crate::error::{BenchError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub n_episodes: usize,
    #[serde(default = "default_n_seeds")]
    pub n_seeds: usize,
    /// Multiplies every environment reward.
    #[serde(default = "default_reward_scale")]
    pub reward_scale: f64,
    /// End a run at the end of its first goal-reaching episode.
    #[serde(default)]
    pub stop_at_first_goal: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(default = "default_save_checkpoints")]
    pub save_checkpoints: bool,
    pub env: EnvConfig,
    pub agent: AgentConfig,
    #[serde(default)]
    pub schedule: KappaSchedule,
}

fn default_n_seeds() -> usize {
    1
}

fn default_reward_scale() -> f64 {
    1.0
}

fn default_save_checkpoints() -> bool {
    true
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: ExperimentConfig =
            toml::from_str(text).map_err(|e| BenchError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BenchError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            BenchError::Config(msg) => BenchError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("experiment configs always serialize")
    }

    /// Checks everything that can be checked without running: names,
    /// counts, schedule parameters, and that the agent fits the environment.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(BenchError::Config(msg));
        if self.name.is_empty()
            || !self
                .name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-' || c == '.')
        {
            return bad(format!(
                "name {:?} must be non-empty and use only [A-Za-z0-9_.-]",
                self.name
            ));
        }
        if self.n_seeds == 0 {
            return bad("n_seeds must be at least 1".into());
        }
        if self.n_episodes == 0 {
            return bad("n_episodes must be at least 1".into());
        }
        self.schedule
            .validate()
            .map_err(|e| BenchError::Config(e.to_string()))?;
        let env = self
            .env
            .build_scaled(self.reward_scale)
            .map_err(|e| BenchError::Config(e.to_string()))?;
        let mut rngs = RunRngs::new(0);
        self.agent
            .build(env.spec(), 0, &mut rngs.train.agent)
            .map_err(|e| BenchError::Config(e.to_string()))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const CLIFF: &str = r#"
name = "cliff"
n_episodes = 50
n_seeds = 3

[env]
name = "cliff"

[agent]
kind = "explvalues"

[schedule]
kind = "budget_stop"
budget = 30
"#;

    #[test]
    fn parses_with_defaults() {
        let c = ExperimentConfig::from_toml(CLIFF).unwrap();
        assert_eq!(c.n_seeds, 3);
        assert_eq!(c.reward_scale, 1.0);
        assert!(!c.stop_at_first_goal);
        assert!(matches!(c.agent, AgentConfig::Explvalues(p) if p.learning_rate == 0.1));
        assert_eq!(
            c.schedule,
            KappaSchedule::BudgetStop {
                budget: 30,
                value: None
            }
        );
    }

    #[test]
    fn round_trips_through_toml() {
        let c = ExperimentConfig::from_toml(CLIFF).unwrap();
        assert_eq!(ExperimentConfig::from_toml(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn rejects_bad_files() {
        let cases = [
            CLIFF.replace("explvalues", "dqn"),
            CLIFF.replace("\"cliff\"\nn_", "\"cl iff\"\nn_"),
            CLIFF.replace("n_seeds = 3", "n_seeds = 0"),
            CLIFF.replace("budget = 30", "budget = 30\nextra = 1"),
            CLIFF.replace("kind = \"explvalues\"", "kind = \"explvalues\"\nlearning_rate = 2.0"),
            CLIFF.replace("name = \"cliff\"\n\n", "name = \"hopper\"\n\n"),
            CLIFF.replace("name = \"cliff\"\n\n", "name = \"mountain_car\"\n\n"),
            CLIFF.replace("n_episodes = 50", "n_episodes = \"many\""),
        ];
        for text in cases {
            assert!(
                matches!(ExperimentConfig::from_toml(&text), Err(BenchError::Config(_))),
                "accepted:\n{text}"
            );
        }
    }

    #[test]
    fn emuq_accepts_continuous_env() {
        let text = r#"
name = "mc"
n_episodes = 10
[env]
name = "mountain_car"
[agent]
kind = "emuq"
n_features = 50
action_lengthscale = 1.0
"#;
        let c = ExperimentConfig::from_toml(text).unwrap();
        assert!(matches!(&c.agent, AgentConfig::Emuq(e) if e.action_lengthscale == 1.0));
    }
}
