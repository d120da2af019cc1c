use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::mdp::{Action, ActionKind, EnvSpec, Environment, EpisodeClock, RunRng, State, Transition};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MountainCarParams {
    pub power: f64,
    pub gravity: f64,
    pub max_speed: f64,
    pub min_position: f64,
    pub max_position: f64,
    pub goal_position: f64,
    pub start_low: f64,
    pub start_high: f64,
    pub max_episode_steps: usize,
}

impl Default for MountainCarParams {
    fn default() -> Self {
        MountainCarParams {
            power: 0.0015,
            gravity: 0.0025,
            max_speed: 0.07,
            min_position: -1.2,
            max_position: 1.0,
            goal_position: 0.9,
            start_low: -0.6,
            start_high: -0.4,
            max_episode_steps: 500,
        }
    }
}

/// Continuous-action MountainCar with a single unit reward past the goal.
pub struct MountainCar {
    params: MountainCarParams,
    spec: EnvSpec,
    position: f64,
    velocity: f64,
    clock: EpisodeClock,
}

impl MountainCar {
    pub fn new(params: MountainCarParams) -> Result<Self> {
        if !(params.start_low <= params.start_high
            && params.min_position < params.start_low
            && params.start_high < params.goal_position)
        {
            return Err(invalid("start_low/start_high", "start range must sit below the goal"));
        }
        let spec = EnvSpec {
            state_dim: 2,
            action_kind: ActionKind::Box {
                low: vec![-1.0],
                high: vec![1.0],
            },
            max_episode_steps: params.max_episode_steps,
            state_bounds: vec![
                (params.min_position, params.max_position),
                (-params.max_speed, params.max_speed),
            ],
            n_states: None,
        };
        spec.validate()?;
        Ok(MountainCar {
            params,
            spec,
            position: -0.5,
            velocity: 0.0,
            clock: EpisodeClock::default(),
        })
    }

    /// One deterministic dynamics step in raw units.
    pub fn dynamics(&self, position: f64, velocity: f64, force: f64) -> (f64, f64) {
        let p = &self.params;
        let mut v = velocity + force * p.power - p.gravity * (3.0 * position).cos();
        v = v.clamp(-p.max_speed, p.max_speed);
        let mut x = (position + v).clamp(p.min_position, p.max_position);
        // inelastic left wall
        if x <= p.min_position && v < 0.0 {
            x = p.min_position;
            v = 0.0;
        }
        (x, v)
    }

    pub fn raw_state(&self) -> (f64, f64) {
        (self.position, self.velocity)
    }

    pub fn set_raw_state(&mut self, position: f64, velocity: f64) {
        self.position = position;
        self.velocity = velocity;
    }

    fn observe(&self) -> State {
        State::continuous(self.spec.normalize(&[self.position, self.velocity]))
    }
}

impl Environment for MountainCar {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, rng: &mut RunRng) -> State {
        self.clock.reset();
        self.position = rng.random_range(self.params.start_low..=self.params.start_high);
        self.velocity = 0.0;
        self.observe()
    }

    fn step(&mut self, action: &Action, _rng: &mut RunRng) -> Result<Transition> {
        self.clock.ensure_running()?;
        self.spec.action_kind.check(action)?;
        let force = action.continuous().expect("checked")[0];
        let state = self.observe();
        let (x, v) = self.dynamics(self.position, self.velocity, force);
        self.position = x;
        self.velocity = v;
        let absorbed = x > self.params.goal_position;
        let (terminal, truncated) = self.clock.tick(absorbed, self.spec.max_episode_steps);
        Ok(Transition {
            state,
            action: action.clone(),
            reward: if absorbed { 1.0 } else { 0.0 },
            next_state: self.observe(),
            terminal,
            truncated,
        })
    }
}
