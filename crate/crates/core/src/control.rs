//! Exploration schedules and the training loop that applies them.
//!
//! A schedule decides, per episode, the exploration weight handed to the agent
//! and whether the agent may learn. Stopping exploration sets the weight to 0
//! and freezes every model, counts included.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::mdp::{
    run_episode, run_frozen_episode, Agent, Environment, EpisodeControl, EpisodeLog, Mode, RunRngs,
    Streams,
};

/// `value` fields default to the agent's own exploration weight.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum KappaSchedule {
    Constant {
        #[serde(default)]
        value: Option<f64>,
    },
    /// `κ₀ / (1 + c·t)` with `t` the episode index.
    Decay {
        c: f64,
        #[serde(default)]
        value: Option<f64>,
    },
    /// Explore for `budget` episodes, then exploit with frozen models.
    BudgetStop {
        budget: usize,
        #[serde(default)]
        value: Option<f64>,
    },
    /// Frozen pure exploitation during `[stop_at, resume_at)`.
    StopResume {
        stop_at: usize,
        resume_at: usize,
        #[serde(default)]
        value: Option<f64>,
    },
    /// Explore until `n_consecutive` pure-exploitation test episodes, run
    /// after a training episode, all return more than `target`.
    TargetStop {
        #[serde(default = "default_target")]
        target: f64,
        #[serde(default = "default_n_consecutive")]
        n_consecutive: usize,
        #[serde(default)]
        value: Option<f64>,
    },
}

fn default_target() -> f64 {
    0.1
}

fn default_n_consecutive() -> usize {
    5
}

impl Default for KappaSchedule {
    fn default() -> Self {
        KappaSchedule::Constant { value: None }
    }
}

impl KappaSchedule {
    pub fn validate(&self) -> Result<()> {
        let value = match self {
            KappaSchedule::Constant { value } => value,
            KappaSchedule::Decay { c, value } => {
                if !(*c >= 0.0 && c.is_finite()) {
                    return Err(invalid("c", "decay rate must be non-negative and finite"));
                }
                value
            }
            KappaSchedule::BudgetStop { value, .. } => value,
            KappaSchedule::StopResume {
                stop_at,
                resume_at,
                value,
            } => {
                if resume_at < stop_at {
                    return Err(invalid("resume_at", "must not precede stop_at"));
                }
                value
            }
            KappaSchedule::TargetStop {
                target,
                n_consecutive,
                value,
            } => {
                if *n_consecutive == 0 {
                    return Err(invalid("n_consecutive", "must be at least 1"));
                }
                if !target.is_finite() {
                    return Err(invalid("target", "must be finite"));
                }
                value
            }
        };
        if let Some(v) = value {
            if !(*v >= 0.0 && v.is_finite()) {
                return Err(invalid("value", "must be non-negative and finite"));
            }
        }
        Ok(())
    }

    fn value(&self) -> Option<f64> {
        match self {
            KappaSchedule::Constant { value }
            | KappaSchedule::Decay { value, .. }
            | KappaSchedule::BudgetStop { value, .. }
            | KappaSchedule::StopResume { value, .. }
            | KappaSchedule::TargetStop { value, .. } => *value,
        }
    }

    /// Control for `episode` given an agent default weight and whether a
    /// target stop has latched.
    pub fn control(&self, episode: usize, default_weight: f64, latched: bool) -> EpisodeControl {
        let k0 = self.value().unwrap_or(default_weight);
        let explore = |kappa| EpisodeControl {
            kappa,
            learning: true,
        };
        match self {
            KappaSchedule::Constant { .. } => explore(k0),
            KappaSchedule::Decay { c, .. } => explore(k0 / (1.0 + c * episode as f64)),
            KappaSchedule::BudgetStop { budget, .. } => {
                if episode < *budget {
                    explore(k0)
                } else {
                    EpisodeControl::exploit_only()
                }
            }
            KappaSchedule::StopResume {
                stop_at, resume_at, ..
            } => {
                if (*stop_at..*resume_at).contains(&episode) {
                    EpisodeControl::exploit_only()
                } else {
                    explore(k0)
                }
            }
            KappaSchedule::TargetStop { .. } => {
                if latched {
                    EpisodeControl::exploit_only()
                } else {
                    explore(k0)
                }
            }
        }
    }

    pub fn kappa_at(&self, episode: usize, default_weight: f64, latched: bool) -> f64 {
        self.control(episode, default_weight, latched).kappa
    }

    fn target(&self) -> Option<(f64, usize)> {
        match self {
            KappaSchedule::TargetStop {
                target,
                n_consecutive,
                ..
            } => Some((*target, *n_consecutive)),
            _ => None,
        }
    }
}

/// True iff the last `n_consecutive` returns all exceed `target`.
pub fn target_check(eval_returns: &[f64], target: f64, n_consecutive: usize) -> bool {
    n_consecutive >= 1
        && eval_returns.len() >= n_consecutive
        && eval_returns[eval_returns.len() - n_consecutive..]
            .iter()
            .all(|&r| r > target)
}

/// Undiscounted returns of `n_episodes` pure-exploitation episodes.
pub fn eval_pure_exploit(
    env: &mut dyn Environment,
    agent: &dyn Agent,
    n_episodes: usize,
    streams: &mut Streams,
) -> Result<Vec<f64>> {
    (0..n_episodes)
        .map(|_| run_frozen_episode(env, agent, streams).map(|log| log.return_undiscounted))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingOptions {
    pub n_episodes: usize,
    /// End the run right after the first episode that reaches a goal.
    pub stop_at_first_goal: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub steps: usize,
    pub return_undiscounted: f64,
    pub kappa: f64,
    pub reached_goal: bool,
    /// Models were not updated during this episode.
    pub frozen: bool,
    /// Test returns scored after this episode (target stop only).
    pub eval_returns: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingOutcome {
    pub records: Vec<EpisodeRecord>,
    /// Zero-based index of the first episode that reached a goal.
    pub first_goal_episode: Option<usize>,
    /// Environment steps taken up to and including the first goal.
    pub steps_to_first_goal: Option<usize>,
    /// Episode after which the target stop latched.
    pub target_reached_at: Option<usize>,
}

impl TrainingOutcome {
    pub fn total_steps(&self) -> usize {
        self.records.iter().map(|r| r.steps).sum()
    }

    /// Mean training return over episodes after the target latched.
    pub fn post_target_return(&self) -> Option<f64> {
        let at = self.target_reached_at?;
        let after: Vec<f64> = self
            .records
            .iter()
            .filter(|r| r.episode > at)
            .map(|r| r.return_undiscounted)
            .collect();
        if after.is_empty() {
            None
        } else {
            Some(after.iter().sum::<f64>() / after.len() as f64)
        }
    }
}

/// Train `agent` under `schedule`.
///
/// `eval_env` hosts the target-stop test episodes so they never touch the
/// training environment or random streams. `on_episode` sees every training
/// log as it completes.
pub fn run_training(
    env: &mut dyn Environment,
    eval_env: &mut dyn Environment,
    agent: &mut dyn Agent,
    schedule: &KappaSchedule,
    options: &TrainingOptions,
    rngs: &mut RunRngs,
    mut on_episode: impl FnMut(&EpisodeLog),
) -> Result<TrainingOutcome> {
    schedule.validate()?;
    let default_weight = agent.default_weight();
    let mut outcome = TrainingOutcome::default();
    let mut latched = false;
    let mut total_steps = 0;
    for episode in 0..options.n_episodes {
        let control = schedule.control(episode, default_weight, latched);
        let log = run_episode(env, agent, control, &mut rngs.train, Mode::Train)?;
        on_episode(&log);
        total_steps += log.steps;
        if log.reached_goal && outcome.first_goal_episode.is_none() {
            outcome.first_goal_episode = Some(episode);
            outcome.steps_to_first_goal = Some(total_steps);
        }
        let mut eval_returns = Vec::new();
        if let (Some((target, n)), false) = (schedule.target(), latched) {
            eval_returns = eval_pure_exploit(eval_env, &*agent, n, &mut rngs.eval)?;
            if target_check(&eval_returns, target, n) {
                latched = true;
                outcome.target_reached_at = Some(episode);
            }
        }
        outcome.records.push(EpisodeRecord {
            episode,
            steps: log.steps,
            return_undiscounted: log.return_undiscounted,
            kappa: control.kappa,
            reached_goal: log.reached_goal,
            frozen: !control.learning,
            eval_returns,
        });
        if options.stop_at_first_goal && log.reached_goal {
            break;
        }
    }
    Ok(outcome)
}
