//! Exploration as a separate value channel.
//!
//! Agents keep an exploitation value `Q` learned from environment rewards and
//! an exploration value `U` learned from intrinsic rewards, and act greedily
//! on `Q + κU`. Setting `κ = 0` recovers pure exploitation at any time without
//! retraining.

pub mod bayes;
pub mod control;
pub mod emuq;
pub mod envs;
pub mod error;
pub mod features;
pub mod mdp;
pub mod tabular;

pub use error::{Error, Result};
pub use mdp::{
    run_episode, run_frozen_episode, Action, ActionKind, Agent, EnvSpec, Environment,
    EpisodeControl, EpisodeLog, EpisodeReport, Mode, RunRng, RunRngs, State, StepInfo, Streams,
    Transition,
};
