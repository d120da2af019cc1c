use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{Action, ActionKind, EnvSpec, Environment, EpisodeClock, RunRng, State, Transition};

pub const TAXI_PICKUP: usize = 4;
pub const TAXI_DROPOFF: usize = 5;
const IN_TAXI: usize = 4;
const SIZE: usize = 5;
const WRONG_ACTION_REWARD: f64 = -0.1;

/// The canonical map; `|` between two cells is a wall, `:` an opening.
const MAP: [&str; SIZE] = [
    "|R: | : :G|",
    "| : | : : |",
    "| : : : : |",
    "| | : | : |",
    "|Y| : |B: |",
];

/// R, G, Y, B as (row, col).
const SPECIALS: [(usize, usize); 4] = [(0, 0), (0, 4), (4, 0), (4, 3)];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TaxiState {
    pub row: usize,
    pub col: usize,
    /// 0..4 for a special location, 4 while riding.
    pub passenger: usize,
    pub destination: usize,
}

impl TaxiState {
    pub fn index(&self) -> usize {
        ((self.row * SIZE + self.col) * 5 + self.passenger) * 4 + self.destination
    }

    pub fn from_index(index: usize) -> Option<TaxiState> {
        if index >= 500 {
            return None;
        }
        let destination = index % 4;
        let rest = index / 4;
        let passenger = rest % 5;
        let cell = rest / 5;
        Some(TaxiState {
            row: cell / SIZE,
            col: cell % SIZE,
            passenger,
            destination,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaxiParams {
    pub max_episode_steps: usize,
}

impl Default for TaxiParams {
    fn default() -> Self {
        TaxiParams {
            max_episode_steps: 200,
        }
    }
}

/// Goal-only Taxi: +1 for a correct drop-off (absorbing), -0.1 for pick-up or
/// drop-off attempts in the wrong place, 0 for every move.
pub struct Taxi {
    spec: EnvSpec,
    /// `east_wall[r][c]`: wall between (r, c) and (r, c + 1).
    east_wall: [[bool; SIZE]; SIZE],
    state: TaxiState,
    clock: EpisodeClock,
}

impl Taxi {
    pub fn new(params: TaxiParams) -> Result<Self> {
        let spec = EnvSpec {
            state_dim: 4,
            action_kind: ActionKind::Discrete(6),
            max_episode_steps: params.max_episode_steps,
            state_bounds: vec![(0.0, 4.0), (0.0, 4.0), (0.0, 4.0), (0.0, 3.0)],
            n_states: Some(500),
        };
        spec.validate()?;
        let mut east_wall = [[false; SIZE]; SIZE];
        for (r, line) in MAP.iter().enumerate() {
            let bytes = line.as_bytes();
            for (c, wall) in east_wall[r].iter_mut().enumerate().take(SIZE - 1) {
                *wall = bytes[2 * c + 2] == b'|';
            }
        }
        Ok(Taxi {
            spec,
            east_wall,
            state: TaxiState {
                row: 0,
                col: 0,
                passenger: 0,
                destination: 1,
            },
            clock: EpisodeClock::default(),
        })
    }

    pub fn observe(&self, s: TaxiState) -> State {
        let raw = [
            s.row as f64,
            s.col as f64,
            s.passenger as f64,
            s.destination as f64,
        ];
        State::discrete(self.spec.normalize(&raw), s.index())
    }

    pub fn set_state(&mut self, s: TaxiState) -> Result<()> {
        if s.row >= SIZE || s.col >= SIZE || s.passenger > IN_TAXI || s.destination >= 4 {
            return Err(Error::InvalidState(format!("{s:?}")));
        }
        self.state = s;
        Ok(())
    }

    pub fn special(i: usize) -> (usize, usize) {
        SPECIALS[i]
    }

    /// Result of one action: (next state, reward, absorbed).
    pub fn transition(&self, s: TaxiState, action: usize) -> (TaxiState, f64, bool) {
        let mut next = s;
        let at = (s.row, s.col);
        match action {
            0 => next.row = s.row.saturating_sub(1),
            1 => next.row = (s.row + 1).min(SIZE - 1),
            2 => {
                if s.col + 1 < SIZE && !self.east_wall[s.row][s.col] {
                    next.col += 1;
                }
            }
            3 => {
                if s.col > 0 && !self.east_wall[s.row][s.col - 1] {
                    next.col -= 1;
                }
            }
            TAXI_PICKUP => {
                if s.passenger < IN_TAXI && SPECIALS[s.passenger] == at {
                    next.passenger = IN_TAXI;
                } else {
                    return (s, WRONG_ACTION_REWARD, false);
                }
            }
            TAXI_DROPOFF => {
                if s.passenger == IN_TAXI && SPECIALS[s.destination] == at {
                    next.passenger = s.destination;
                    return (next, 1.0, true);
                } else {
                    return (s, WRONG_ACTION_REWARD, false);
                }
            }
            _ => unreachable!("action validated by caller"),
        }
        (next, 0.0, false)
    }
}

impl Environment for Taxi {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, rng: &mut RunRng) -> State {
        self.clock.reset();
        let cell = rng.random_range(0..SIZE * SIZE);
        let passenger = rng.random_range(0..4);
        let mut destination = rng.random_range(0..3);
        if destination >= passenger {
            destination += 1;
        }
        self.state = TaxiState {
            row: cell / SIZE,
            col: cell % SIZE,
            passenger,
            destination,
        };
        self.observe(self.state)
    }

    fn step(&mut self, action: &Action, _rng: &mut RunRng) -> Result<Transition> {
        self.clock.ensure_running()?;
        self.spec.action_kind.check(action)?;
        let a = action.discrete().expect("checked");
        let state = self.observe(self.state);
        let (next, reward, absorbed) = self.transition(self.state, a);
        self.state = next;
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
