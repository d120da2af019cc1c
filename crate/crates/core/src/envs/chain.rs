use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::mdp::{Action, ActionKind, EnvSpec, Environment, EpisodeClock, RunRng, State, Transition};

pub const CHAIN_LEFT: usize = 0;
pub const CHAIN_RIGHT: usize = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChainParams {
    pub n_states: usize,
    /// Each non-goal transition pays -1 with probability `1 - p`; `p = 1` is
    /// the goal-only chain.
    pub semi_sparse_p: f64,
    pub max_episode_steps: usize,
}

impl Default for ChainParams {
    fn default() -> Self {
        ChainParams {
            n_states: 10,
            semi_sparse_p: 1.0,
            max_episode_steps: 1000,
        }
    }
}

/// The N-state chain: `right` succeeds with probability 1 - 1/N and slips
/// left otherwise, `left` is deterministic, and the leftmost state self-loops.
pub struct Chain {
    params: ChainParams,
    spec: EnvSpec,
    position: usize,
    clock: EpisodeClock,
}

impl Chain {
    pub fn new(params: ChainParams) -> Result<Self> {
        if params.n_states < 2 {
            return Err(invalid("n_states", "chain needs at least 2 states"));
        }
        if !(0.0..=1.0).contains(&params.semi_sparse_p) {
            return Err(invalid("semi_sparse_p", "must lie in [0, 1]"));
        }
        let spec = EnvSpec {
            state_dim: 1,
            action_kind: ActionKind::Discrete(2),
            max_episode_steps: params.max_episode_steps,
            state_bounds: vec![(0.0, (params.n_states - 1) as f64)],
            n_states: Some(params.n_states),
        };
        spec.validate()?;
        Ok(Chain {
            params,
            spec,
            position: 0,
            clock: EpisodeClock::default(),
        })
    }

    pub fn goal(&self) -> usize {
        self.params.n_states - 1
    }

    /// Next position given the uniform draw used for the `right` slip.
    pub fn next_position(&self, position: usize, action: usize, slip_draw: f64) -> usize {
        let n = self.params.n_states;
        let success = 1.0 - 1.0 / n as f64;
        let go_right = action == CHAIN_RIGHT && slip_draw < success;
        if go_right {
            (position + 1).min(n - 1)
        } else {
            position.saturating_sub(1)
        }
    }

    fn observe(&self, position: usize) -> State {
        State::discrete(self.spec.normalize(&[position as f64]), position)
    }

    /// Place the agent at an arbitrary non-goal position (mid-episode tests).
    pub fn set_position(&mut self, position: usize) -> Result<()> {
        if position >= self.goal() {
            return Err(Error::InvalidState(format!("position {position} is not a start")));
        }
        self.position = position;
        Ok(())
    }
}

impl Environment for Chain {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, _rng: &mut RunRng) -> State {
        self.clock.reset();
        self.position = 0;
        self.observe(0)
    }

    fn step(&mut self, action: &Action, rng: &mut RunRng) -> Result<Transition> {
        self.clock.ensure_running()?;
        self.spec.action_kind.check(action)?;
        let a = action.discrete().expect("checked discrete");
        let state = self.observe(self.position);
        let slip_draw = if a == CHAIN_RIGHT { rng.random::<f64>() } else { 1.0 };
        let next = self.next_position(self.position, a, slip_draw);
        let absorbed = next == self.goal();
        let reward = if absorbed {
            1.0
        } else if self.params.semi_sparse_p < 1.0
            && rng.random::<f64>() < 1.0 - self.params.semi_sparse_p
        {
            -1.0
        } else {
            0.0
        };
        self.position = next;
        let (terminal, truncated) = self.clock.tick(absorbed, self.spec.max_episode_steps);
        Ok(Transition {
            state,
            action: action.clone(),
            reward,
            next_state: self.observe(next),
            terminal,
            truncated,
        })
    }
}
