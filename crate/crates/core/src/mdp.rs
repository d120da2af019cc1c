//! Environment and agent abstractions shared by every domain and learner,
//! plus the episode loop that ties them together.
//!
//! Agents only ever see min-max normalized state vectors; environments keep
//! raw physical units internally and normalize through their [`EnvSpec`].

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bayes::SweepReport;
use crate::error::{Error, Result};

/// The one RNG type used throughout a run.
pub type RunRng = ChaCha8Rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Action {
    Discrete(usize),
    Continuous(Vec<f64>),
}

impl Action {
    pub fn discrete(&self) -> Option<usize> {
        match self {
            Action::Discrete(i) => Some(*i),
            Action::Continuous(_) => None,
        }
    }

    pub fn continuous(&self) -> Option<&[f64]> {
        match self {
            Action::Discrete(_) => None,
            Action::Continuous(v) => Some(v),
        }
    }
}

/// Observation delivered to agents: normalized values, plus a table index for
/// fully discrete domains.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub values: Vec<f64>,
    pub index: Option<usize>,
}

impl State {
    pub fn continuous(values: Vec<f64>) -> Self {
        State {
            values,
            index: None,
        }
    }

    pub fn discrete(values: Vec<f64>, index: usize) -> Self {
        State {
            values,
            index: Some(index),
        }
    }

    pub fn require_index(&self) -> Result<usize> {
        self.index
            .ok_or_else(|| Error::InvalidState("tabular agent needs a discrete state index".into()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: State,
    pub action: Action,
    pub reward: f64,
    pub next_state: State,
    /// The episode is over, either absorbed or cut by the step cap.
    pub terminal: bool,
    /// Set when `terminal` came only from the step cap.
    pub truncated: bool,
}

impl Transition {
    /// Absorbing transitions zero the bootstrap term; step-cap truncation does not.
    pub fn absorbing(&self) -> bool {
        self.terminal && !self.truncated
    }

    pub fn reached_goal(&self) -> bool {
        self.absorbing() && self.reward > 0.0
    }

    /// Multiplier applied to the bootstrapped next-state value.
    pub fn continuation(&self) -> f64 {
        if self.absorbing() {
            0.0
        } else {
            1.0
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ActionKind {
    Discrete(usize),
    Box { low: Vec<f64>, high: Vec<f64> },
}

impl ActionKind {
    pub fn dim(&self) -> usize {
        match self {
            ActionKind::Discrete(_) => 1,
            ActionKind::Box { low, .. } => low.len(),
        }
    }

    pub fn check(&self, action: &Action) -> Result<()> {
        match (self, action) {
            (ActionKind::Discrete(n), Action::Discrete(i)) => {
                if i < n {
                    Ok(())
                } else {
                    Err(Error::InvalidAction(format!("index {i} outside 0..{n}")))
                }
            }
            (ActionKind::Box { low, high }, Action::Continuous(a)) => {
                if a.len() != low.len() {
                    return Err(Error::InvalidAction(format!(
                        "expected {} action dims, got {}",
                        low.len(),
                        a.len()
                    )));
                }
                for (k, &x) in a.iter().enumerate() {
                    if !x.is_finite() || x < low[k] || x > high[k] {
                        return Err(Error::InvalidAction(format!(
                            "component {k} = {x} outside [{}, {}]",
                            low[k], high[k]
                        )));
                    }
                }
                Ok(())
            }
            (ActionKind::Discrete(_), Action::Continuous(_)) => Err(Error::InvalidAction(
                "continuous action for a discrete action space".into(),
            )),
            (ActionKind::Box { .. }, Action::Discrete(_)) => Err(Error::InvalidAction(
                "discrete action for a continuous action space".into(),
            )),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub state_dim: usize,
    pub action_kind: ActionKind,
    pub max_episode_steps: usize,
    /// Raw-unit bounds per observation dimension, used for normalization.
    pub state_bounds: Vec<(f64, f64)>,
    /// Number of discrete states for tabular domains.
    pub n_states: Option<usize>,
}

impl EnvSpec {
    pub fn validate(&self) -> Result<()> {
        if self.max_episode_steps == 0 {
            return Err(crate::error::invalid("max_episode_steps", "must be at least 1"));
        }
        if self.state_bounds.len() != self.state_dim {
            return Err(Error::DimensionMismatch {
                expected: self.state_dim,
                got: self.state_bounds.len(),
            });
        }
        if self.state_bounds.iter().any(|&(lo, hi)| !(lo < hi)) {
            return Err(crate::error::invalid("state_bounds", "need low < high per dimension"));
        }
        if let ActionKind::Box { low, high } = &self.action_kind {
            if low.len() != high.len() || low.iter().zip(high).any(|(l, h)| !(l < h)) {
                return Err(crate::error::invalid("action_kind", "need low < high per dimension"));
            }
        }
        Ok(())
    }

    /// Min-max normalization of a raw observation onto [0, 1] per dimension.
    pub fn normalize(&self, raw: &[f64]) -> Vec<f64> {
        raw.iter()
            .zip(&self.state_bounds)
            .map(|(&x, &(lo, hi))| ((x - lo) / (hi - lo)).clamp(0.0, 1.0))
            .collect()
    }

    pub fn n_actions(&self) -> Option<usize> {
        match self.action_kind {
            ActionKind::Discrete(n) => Some(n),
            ActionKind::Box { .. } => None,
        }
    }
}

pub trait Environment: Send {
    fn spec(&self) -> &EnvSpec;

    /// Start a new episode and return its (normalized) first state.
    fn reset(&mut self, rng: &mut RunRng) -> State;

    fn step(&mut self, action: &Action, rng: &mut RunRng) -> Result<Transition>;
}

impl<E: Environment + ?Sized> Environment for Box<E> {
    fn spec(&self) -> &EnvSpec {
        (**self).spec()
    }

    fn reset(&mut self, rng: &mut RunRng) -> State {
        (**self).reset(rng)
    }

    fn step(&mut self, action: &Action, rng: &mut RunRng) -> Result<Transition> {
        (**self).step(action, rng)
    }
}

/// Step counter and episode-finished latch every environment embeds.
#[derive(Clone, Debug, Default)]
pub struct EpisodeClock {
    steps: usize,
    started: bool,
    finished: bool,
}

impl EpisodeClock {
    pub fn reset(&mut self) {
        self.steps = 0;
        self.started = true;
        self.finished = false;
    }

    pub fn ensure_running(&self) -> Result<()> {
        if !self.started {
            Err(Error::NotReset)
        } else if self.finished {
            Err(Error::EpisodeFinished)
        } else {
            Ok(())
        }
    }

    /// Count one step; returns `(terminal, truncated)` given whether the
    /// environment itself reached an absorbing state.
    pub fn tick(&mut self, absorbed: bool, cap: usize) -> (bool, bool) {
        self.steps += 1;
        let truncated = !absorbed && self.steps >= cap;
        let terminal = absorbed || truncated;
        self.finished = terminal;
        (terminal, truncated)
    }

    pub fn steps(&self) -> usize {
        self.steps
    }
}

/// Per-step diagnostics an agent may report back from an update.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    pub exploration_reward: Option<f64>,
    /// Predictive variance at the executed (s, a) before it was absorbed.
    pub variance: Option<f64>,
    /// Upper bound the variance must respect.
    pub variance_bound: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EpisodeReport {
    pub sweep: Option<SweepReport>,
}

/// A learner that picks actions from a state and learns from transitions.
///
/// `weight` is the exploration parameter for the current episode: κ for the
/// value-channel agents, ξ for the additive-bonus agent, and ε for the
/// ε-greedy baseline. Zero always means pure exploitation.
pub trait Agent: Send {
    fn act(&self, state: &State, weight: f64, rng: &mut RunRng) -> Result<Action>;

    fn observe(&mut self, transition: &Transition, weight: f64, rng: &mut RunRng)
        -> Result<StepInfo>;

    fn end_episode(&mut self, _weight: f64, _rng: &mut RunRng) -> Result<EpisodeReport> {
        Ok(EpisodeReport::default())
    }

    /// Exploration weight used when a schedule does not set one.
    fn default_weight(&self) -> f64;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Train,
    Eval,
}

/// What the schedule decided for one episode.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeControl {
    pub kappa: f64,
    pub learning: bool,
}

impl EpisodeControl {
    pub fn exploit_only() -> Self {
        EpisodeControl {
            kappa: 0.0,
            learning: false,
        }
    }
}

/// Independent environment and agent random streams.
#[derive(Clone, Debug)]
pub struct Streams {
    pub env: RunRng,
    pub agent: RunRng,
}

/// All random streams of one run, derived from a single seed.
#[derive(Clone, Debug)]
pub struct RunRngs {
    pub train: Streams,
    pub eval: Streams,
}

impl RunRngs {
    pub fn new(seed: u64) -> Self {
        let stream = |k: u64| {
            let mut rng = RunRng::seed_from_u64(seed);
            rng.set_stream(k);
            rng
        };
        RunRngs {
            train: Streams {
                env: stream(0),
                agent: stream(1),
            },
            eval: Streams {
                env: stream(2),
                agent: stream(3),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub transitions: Vec<Transition>,
    pub return_undiscounted: f64,
    pub steps: usize,
    pub reached_goal: bool,
    pub kappa_used: Vec<f64>,
    pub step_info: Vec<StepInfo>,
    pub report: Option<EpisodeReport>,
}

impl EpisodeLog {
    fn new() -> Self {
        EpisodeLog {
            transitions: Vec::new(),
            return_undiscounted: 0.0,
            steps: 0,
            reached_goal: false,
            kappa_used: Vec::new(),
            step_info: Vec::new(),
            report: None,
        }
    }

    fn push(&mut self, t: Transition, kappa: f64, info: StepInfo) {
        self.return_undiscounted += t.reward;
        self.steps += 1;
        self.reached_goal |= t.reached_goal();
        self.kappa_used.push(kappa);
        self.step_info.push(info);
        self.transitions.push(t);
    }
}

/// Run one episode to termination.
///
/// In [`Mode::Eval`] the agent is only borrowed immutably, κ is forced to 0
/// and no learning happens regardless of `control`.
pub fn run_episode(
    env: &mut dyn Environment,
    agent: &mut dyn Agent,
    control: EpisodeControl,
    streams: &mut Streams,
    mode: Mode,
) -> Result<EpisodeLog> {
    match mode {
        Mode::Eval => run_frozen_episode(env, &*agent, streams),
        Mode::Train => {
            let mut log = EpisodeLog::new();
            let mut state = env.reset(&mut streams.env);
            loop {
                let action = agent.act(&state, control.kappa, &mut streams.agent)?;
                let t = env.step(&action, &mut streams.env)?;
                let info = if control.learning {
                    agent.observe(&t, control.kappa, &mut streams.agent)?
                } else {
                    StepInfo::default()
                };
                let done = t.terminal;
                state = t.next_state.clone();
                log.push(t, control.kappa, info);
                if done {
                    break;
                }
            }
            if control.learning {
                log.report = Some(agent.end_episode(control.kappa, &mut streams.agent)?);
            }
            Ok(log)
        }
    }
}

/// Pure-exploitation episode on an immutably borrowed agent.
pub fn run_frozen_episode(
    env: &mut dyn Environment,
    agent: &dyn Agent,
    streams: &mut Streams,
) -> Result<EpisodeLog> {
    let mut log = EpisodeLog::new();
    let mut state = env.reset(&mut streams.env);
    loop {
        let action = agent.act(&state, 0.0, &mut streams.agent)?;
        let t = env.step(&action, &mut streams.env)?;
        let done = t.terminal;
        state = t.next_state.clone();
        log.push(t, 0.0, StepInfo::default());
        if done {
            return Ok(log);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clock_truncates_at_cap_without_absorbing() {
        let mut clock = EpisodeClock::default();
        clock.reset();
        assert_eq!(clock.tick(false, 2), (false, false));
        assert_eq!(clock.tick(false, 2), (true, true));
        assert_eq!(clock.ensure_running(), Err(Error::EpisodeFinished));
    }

    #[test]
    fn clock_requires_reset() {
        let clock = EpisodeClock::default();
        assert_eq!(clock.ensure_running(), Err(Error::NotReset));
    }

    #[test]
    fn absorbing_goal_zeroes_bootstrap() {
        let s = State::continuous(vec![0.0]);
        let mut t = Transition {
            state: s.clone(),
            action: Action::Discrete(0),
            reward: 1.0,
            next_state: s,
            terminal: true,
            truncated: false,
        };
        assert!(t.reached_goal());
        assert_eq!(t.continuation(), 0.0);
        t.truncated = true;
        assert!(!t.reached_goal());
        assert_eq!(t.continuation(), 1.0);
    }

    #[test]
    fn box_action_bounds_checked() {
        let kind = ActionKind::Box {
            low: vec![-1.0],
            high: vec![1.0],
        };
        assert!(kind.check(&Action::Continuous(vec![0.5])).is_ok());
        assert!(kind.check(&Action::Continuous(vec![1.5])).is_err());
        assert!(kind.check(&Action::Continuous(vec![0.0, 0.0])).is_err());
        assert!(kind.check(&Action::Discrete(0)).is_err());
    }

    #[test]
    fn spec_rejects_degenerate_bounds() {
        let spec = EnvSpec {
            state_dim: 1,
            action_kind: ActionKind::Discrete(2),
            max_episode_steps: 10,
            state_bounds: vec![(1.0, 1.0)],
            n_states: None,
        };
        assert!(spec.validate().is_err());
    }

    #[test]
    fn rng_streams_differ_but_are_reproducible() {
        use rand::Rng;
        let mut a = RunRngs::new(7);
        let mut b = RunRngs::new(7);
        let x: u64 = a.train.env.random();
        let y: u64 = a.train.agent.random();
        assert_ne!(x, y);
        assert_eq!(x, b.train.env.random::<u64>());
        assert_eq!(y, b.train.agent.random::<u64>());
    }
}
