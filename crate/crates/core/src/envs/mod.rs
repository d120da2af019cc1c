//! Goal-only benchmark domains.
//!
//! Rewards are +1 at absorbing goal states, occasionally negative for
//! penalized events, and zero elsewhere.

mod chain;
mod cliff;
mod mountain_car;
mod pendulum;
mod taxi;

pub use chain::{Chain, ChainParams, CHAIN_LEFT, CHAIN_RIGHT};
pub use cliff::{Cliff, CliffParams, GridWorldLayout, Move};
pub use mountain_car::{MountainCar, MountainCarParams};
pub use pendulum::{Pendulum, PendulumParams};
pub use taxi::{Taxi, TaxiParams, TaxiState, TAXI_DROPOFF, TAXI_PICKUP};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::mdp::{Action, EnvSpec, Environment, RunRng, State, Transition};

/// Environment name plus its parameter table, as written in experiment files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum EnvConfig {
    Chain(ChainParams),
    Cliff(CliffParams),
    Taxi(TaxiParams),
    MountainCar(MountainCarParams),
    Pendulum(PendulumParams),
}

impl EnvConfig {
    /// Default parameters for a named environment.
    pub fn by_name(name: &str) -> Option<Self> {
        Some(match name {
            "chain" => EnvConfig::Chain(ChainParams::default()),
            "cliff" => EnvConfig::Cliff(CliffParams::default()),
            "taxi" => EnvConfig::Taxi(TaxiParams::default()),
            "mountain_car" => EnvConfig::MountainCar(MountainCarParams::default()),
            "pendulum" => EnvConfig::Pendulum(PendulumParams::default()),
            _ => return None,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            EnvConfig::Chain(_) => "chain",
            EnvConfig::Cliff(_) => "cliff",
            EnvConfig::Taxi(_) => "taxi",
            EnvConfig::MountainCar(_) => "mountain_car",
            EnvConfig::Pendulum(_) => "pendulum",
        }
    }

    pub fn build(&self) -> Result<Box<dyn Environment>> {
        Ok(match self {
            EnvConfig::Chain(p) => Box::new(Chain::new(p.clone())?),
            EnvConfig::Cliff(p) => Box::new(Cliff::new(p.clone())?),
            EnvConfig::Taxi(p) => Box::new(Taxi::new(p.clone())?),
            EnvConfig::MountainCar(p) => Box::new(MountainCar::new(p.clone())?),
            EnvConfig::Pendulum(p) => Box::new(Pendulum::new(p.clone())?),
        })
    }

    /// Build and wrap with a reward multiplier when `scale != 1`.
    pub fn build_scaled(&self, scale: f64) -> Result<Box<dyn Environment>> {
        let env = self.build()?;
        if scale == 1.0 {
            Ok(env)
        } else {
            Ok(Box::new(RewardScaled::new(env, scale)?))
        }
    }
}

/// Multiplies every environment reward by a positive constant.
pub struct RewardScaled<E> {
    inner: E,
    scale: f64,
}

impl<E: Environment> RewardScaled<E> {
    pub fn new(inner: E, scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(invalid("reward_scale", "must be positive and finite"));
        }
        Ok(RewardScaled { inner, scale })
    }
}

impl<E: Environment> Environment for RewardScaled<E> {
    fn spec(&self) -> &EnvSpec {
        self.inner.spec()
    }

    fn reset(&mut self, rng: &mut RunRng) -> State {
        self.inner.reset(rng)
    }

    fn step(&mut self, action: &Action, rng: &mut RunRng) -> Result<Transition> {
        let mut t = self.inner.step(action, rng)?;
        t.reward *= self.scale;
        Ok(t)
    }
}
