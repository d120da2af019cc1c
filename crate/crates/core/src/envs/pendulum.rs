use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::mdp::{Action, ActionKind, EnvSpec, Environment, EpisodeClock, RunRng, State, Transition};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PendulumParams {
    pub gravity: f64,
    pub mass: f64,
    pub length: f64,
    pub dt: f64,
    pub max_speed: f64,
    pub max_torque: f64,
    /// Success when the pole is within this many radians of upright.
    pub goal_angle: f64,
    /// Half-width of the uniform start perturbation around hanging down.
    pub start_noise: f64,
    pub max_episode_steps: usize,
}

impl Default for PendulumParams {
    fn default() -> Self {
        PendulumParams {
            gravity: 10.0,
            mass: 1.0,
            length: 1.0,
            dt: 0.05,
            max_speed: 8.0,
            max_torque: 2.0,
            goal_angle: 0.05,
            start_noise: 0.1,
            max_episode_steps: 500,
        }
    }
}

/// Wrap to (-π, π].
pub fn wrap_angle(theta: f64) -> f64 {
    let mut a = (theta + PI).rem_euclid(2.0 * PI) - PI;
    if a <= -PI {
        a += 2.0 * PI;
    }
    a
}

/// Torque-limited swing-up pendulum; θ = 0 is upright. Observations are
/// (cos θ, sin θ, θ̇).
pub struct Pendulum {
    params: PendulumParams,
    spec: EnvSpec,
    theta: f64,
    theta_dot: f64,
    clock: EpisodeClock,
}

impl Pendulum {
    pub fn new(params: PendulumParams) -> Result<Self> {
        if !(params.mass > 0.0 && params.length > 0.0 && params.dt > 0.0) {
            return Err(invalid("mass/length/dt", "must be positive"));
        }
        let spec = EnvSpec {
            state_dim: 3,
            action_kind: ActionKind::Box {
                low: vec![-params.max_torque],
                high: vec![params.max_torque],
            },
            max_episode_steps: params.max_episode_steps,
            state_bounds: vec![(-1.0, 1.0), (-1.0, 1.0), (-params.max_speed, params.max_speed)],
            n_states: None,
        };
        spec.validate()?;
        Ok(Pendulum {
            params,
            spec,
            theta: PI,
            theta_dot: 0.0,
            clock: EpisodeClock::default(),
        })
    }

    /// One Euler step in raw units.
    pub fn dynamics(&self, theta: f64, theta_dot: f64, torque: f64) -> (f64, f64) {
        let p = &self.params;
        let accel = 3.0 * p.gravity / (2.0 * p.length) * theta.sin()
            + 3.0 * torque / (p.mass * p.length * p.length);
        let w = (theta_dot + accel * p.dt).clamp(-p.max_speed, p.max_speed);
        (theta + w * p.dt, w)
    }

    pub fn raw_state(&self) -> (f64, f64) {
        (self.theta, self.theta_dot)
    }

    pub fn set_raw_state(&mut self, theta: f64, theta_dot: f64) {
        self.theta = theta;
        self.theta_dot = theta_dot;
    }

    fn observe(&self) -> State {
        let raw = [self.theta.cos(), self.theta.sin(), self.theta_dot];
        State::continuous(self.spec.normalize(&raw))
    }
}

impl Environment for Pendulum {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, rng: &mut RunRng) -> State {
        self.clock.reset();
        let noise = self.params.start_noise;
        self.theta = if noise > 0.0 {
            PI + rng.random_range(-noise..=noise)
        } else {
            PI
        };
        self.theta_dot = 0.0;
        self.observe()
    }

    fn step(&mut self, action: &Action, _rng: &mut RunRng) -> Result<Transition> {
        self.clock.ensure_running()?;
        self.spec.action_kind.check(action)?;
        let torque = action.continuous().expect("checked")[0];
        let state = self.observe();
        let (theta, w) = self.dynamics(self.theta, self.theta_dot, torque);
        self.theta = wrap_angle(theta);
        self.theta_dot = w;
        let absorbed = self.theta.abs() < self.params.goal_angle;
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

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn pendulum() -> Pendulum {
        Pendulum::new(PendulumParams::default()).unwrap()
    }

    #[test]
    fn observation_has_three_dims() {
        let mut env = pendulum();
        let s = env.reset(&mut RunRng::seed_from_u64(0));
        assert_eq!(s.values.len(), 3);
        assert_eq!(env.spec().state_dim, 3);
    }

    #[test]
    fn near_upright_is_goal() {
        let mut env = pendulum();
        let mut rng = RunRng::seed_from_u64(0);
        env.reset(&mut rng);
        env.set_raw_state(0.01, 0.0);
        let t = env.step(&Action::Continuous(vec![0.0]), &mut rng).unwrap();
        assert_eq!(t.reward, 1.0);
        assert!(t.reached_goal());
    }

    #[test]
    fn hanging_down_is_stable_without_torque() {
        let mut env = Pendulum::new(PendulumParams {
            start_noise: 0.0,
            ..PendulumParams::default()
        })
        .unwrap();
        let mut rng = RunRng::seed_from_u64(0);
        env.reset(&mut rng);
        for _ in 0..200 {
            let t = env.step(&Action::Continuous(vec![0.0]), &mut rng).unwrap();
            assert_eq!(t.reward, 0.0);
        }
        let (theta, _) = env.raw_state();
        assert!((wrap_angle(theta).abs() - PI).abs() < 1e-9);
    }

    #[test]
    fn torque_bound_enforced() {
        let mut env = pendulum();
        let mut rng = RunRng::seed_from_u64(0);
        env.reset(&mut rng);
        assert!(env.step(&Action::Continuous(vec![2.5]), &mut rng).is_err());
    }

    #[test]
    fn speed_clipped() {
        let env = pendulum();
        let (_, w) = env.dynamics(1.0, 7.9, 2.0);
        assert!(w <= 8.0);
    }

    #[test]
    fn wrap_angle_range() {
        for k in -20..20 {
            let a = wrap_angle(k as f64 * 0.7);
            assert!(a > -PI && a <= PI);
        }
        assert!((wrap_angle(2.0 * PI + 0.1) - 0.1).abs() < 1e-12);
    }
}
