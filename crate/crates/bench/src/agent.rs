//! Agent selection by name, plus the serializable form used in checkpoints.

use explore_core::emuq::{EmuqAgent, EmuqConfig, EmuqSnapshot};
use explore_core::tabular::{
    AdditiveAgent, EpsilonGreedyAgent, ExplorationValuesAgent, TabularParams,
};
use explore_core::{
    Action, ActionKind, Agent, EnvSpec, EpisodeReport, RunRng, State, StepInfo, Transition,
};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AgentConfig {
    EpsilonGreedy(TabularParams),
    Additive(TabularParams),
    Explvalues(TabularParams),
    Emuq(EmuqConfig),
}

impl AgentConfig {
    pub fn kind(&self) -> &'static str {
        match self {
            AgentConfig::EpsilonGreedy(_) => "epsilon_greedy",
            AgentConfig::Additive(_) => "additive",
            AgentConfig::Explvalues(_) => "explvalues",
            AgentConfig::Emuq(_) => "emuq",
        }
    }

    /// `rng` is the run's training agent stream; EMU-Q draws its fixed
    /// expectation actions from it.
    pub fn build(&self, spec: &EnvSpec, seed: u64, rng: &mut RunRng) -> explore_core::Result<AnyAgent> {
        let tabular = || -> explore_core::Result<(usize, usize)> {
            match (spec.n_states, &spec.action_kind) {
                (Some(s), ActionKind::Discrete(a)) => Ok((s, *a)),
                _ => Err(explore_core::Error::InvalidParameter {
                    name: "agent",
                    reason: "tabular agents need a discrete environment".into(),
                }),
            }
        };
        Ok(match self {
            AgentConfig::EpsilonGreedy(p) => {
                let (s, a) = tabular()?;
                AnyAgent::EpsilonGreedy(EpsilonGreedyAgent::new(s, a, *p)?)
            }
            AgentConfig::Additive(p) => {
                let (s, a) = tabular()?;
                AnyAgent::Additive(AdditiveAgent::new(s, a, *p)?)
            }
            AgentConfig::Explvalues(p) => {
                let (s, a) = tabular()?;
                AnyAgent::Explvalues(ExplorationValuesAgent::new(s, a, *p)?)
            }
            AgentConfig::Emuq(c) => AnyAgent::Emuq(Box::new(EmuqAgent::new(spec, c.clone(), seed, rng)?)),
        })
    }
}

pub enum AnyAgent {
    EpsilonGreedy(EpsilonGreedyAgent),
    Additive(AdditiveAgent),
    Explvalues(ExplorationValuesAgent),
    Emuq(Box<EmuqAgent>),
}

/// Checkpointed agent state. EMU-Q keeps its posterior and feature map but
/// not its transition store.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "state", rename_all = "snake_case")]
pub enum AgentState {
    EpsilonGreedy(EpsilonGreedyAgent),
    Additive(AdditiveAgent),
    Explvalues(ExplorationValuesAgent),
    Emuq(EmuqSnapshot),
}

impl AnyAgent {
    pub fn as_agent(&self) -> &dyn Agent {
        match self {
            AnyAgent::EpsilonGreedy(a) => a,
            AnyAgent::Additive(a) => a,
            AnyAgent::Explvalues(a) => a,
            AnyAgent::Emuq(a) => &**a,
        }
    }

    pub fn as_agent_mut(&mut self) -> &mut dyn Agent {
        match self {
            AnyAgent::EpsilonGreedy(a) => a,
            AnyAgent::Additive(a) => a,
            AnyAgent::Explvalues(a) => a,
            AnyAgent::Emuq(a) => &mut **a,
        }
    }

    pub fn state(&self) -> AgentState {
        match self {
            AnyAgent::EpsilonGreedy(a) => AgentState::EpsilonGreedy(a.clone()),
            AnyAgent::Additive(a) => AgentState::Additive(a.clone()),
            AnyAgent::Explvalues(a) => AgentState::Explvalues(a.clone()),
            AnyAgent::Emuq(a) => AgentState::Emuq(a.snapshot()),
        }
    }

    pub fn from_state(state: AgentState) -> explore_core::Result<Self> {
        Ok(match state {
            AgentState::EpsilonGreedy(a) => AnyAgent::EpsilonGreedy(a),
            AgentState::Additive(a) => AnyAgent::Additive(a),
            AgentState::Explvalues(a) => AnyAgent::Explvalues(a),
            AgentState::Emuq(s) => AnyAgent::Emuq(Box::new(EmuqAgent::restore(s)?)),
        })
    }

    /// Greedy value of `(state, action)` under the exploitation channel.
    pub fn q_value(&self, state: &State, action: &Action) -> explore_core::Result<f64> {
        let tabular = |q: &explore_core::tabular::ValueTable| {
            let s = state.index.ok_or_else(|| {
                explore_core::Error::InvalidState("tabular agents need indexed states".into())
            })?;
            let a = action.discrete().ok_or_else(|| {
                explore_core::Error::InvalidAction("tabular agents need discrete actions".into())
            })?;
            q.get(s, a)
        };
        match self {
            AnyAgent::EpsilonGreedy(a) => tabular(a.q()),
            AnyAgent::Additive(a) => tabular(a.q()),
            AnyAgent::Explvalues(a) => tabular(a.q()),
            AnyAgent::Emuq(a) => a.q_value(state, action),
        }
    }

    /// Whether the agent can act in an environment with this spec.
    pub fn fits(&self, spec: &EnvSpec) -> bool {
        let table = |q: &explore_core::tabular::ValueTable| {
            spec.n_states == Some(q.n_states())
                && spec.action_kind == ActionKind::Discrete(q.n_actions())
        };
        match self {
            AnyAgent::EpsilonGreedy(a) => table(a.q()),
            AnyAgent::Additive(a) => table(a.q()),
            AnyAgent::Explvalues(a) => table(a.q()),
            AnyAgent::Emuq(a) => {
                a.features().state_dim() == spec.state_dim
                    && explore_core::features::ActionEncoding::for_kind(&spec.action_kind)
                        == *a.features().encoding()
            }
        }
    }
}

impl Agent for AnyAgent {
    fn act(&self, state: &State, weight: f64, rng: &mut RunRng) -> explore_core::Result<Action> {
        self.as_agent().act(state, weight, rng)
    }

    fn observe(
        &mut self,
        transition: &Transition,
        weight: f64,
        rng: &mut RunRng,
    ) -> explore_core::Result<StepInfo> {
        self.as_agent_mut().observe(transition, weight, rng)
    }

    fn end_episode(&mut self, weight: f64, rng: &mut RunRng) -> explore_core::Result<EpisodeReport> {
        self.as_agent_mut().end_episode(weight, rng)
    }

    fn default_weight(&self) -> f64 {
        self.as_agent().default_weight()
    }
}
