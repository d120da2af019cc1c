use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::mdp::{Action, ActionKind, EnvSpec, Environment, EpisodeClock, RunRng, State, Transition};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Move {
    North,
    South,
    East,
    West,
}

impl Move {
    pub const ALL: [Move; 4] = [Move::North, Move::South, Move::East, Move::West];

    pub fn from_index(i: usize) -> Option<Move> {
        Move::ALL.get(i).copied()
    }

    pub fn delta(self) -> (isize, isize) {
        match self {
            Move::North => (-1, 0),
            Move::South => (1, 0),
            Move::East => (0, 1),
            Move::West => (0, -1),
        }
    }
}

pub type Cell = (usize, usize);

#[derive(Clone, Debug, PartialEq)]
pub struct GridWorldLayout {
    pub width: usize,
    pub height: usize,
    pub start: Cell,
    pub goal: Cell,
    pub cliff: Vec<Cell>,
    pub walls: Vec<Cell>,
    pub slip_prob: f64,
}

impl GridWorldLayout {
    /// The classic 4x12 board: start bottom-left, goal bottom-right, cliff between.
    pub fn cliff_walking(slip_prob: f64) -> Self {
        GridWorldLayout {
            width: 12,
            height: 4,
            start: (3, 0),
            goal: (3, 11),
            cliff: (1..11).map(|c| (3, c)).collect(),
            walls: Vec::new(),
            slip_prob,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let inside = |(r, c): Cell| r < self.height && c < self.width;
        if !inside(self.start) || !inside(self.goal) {
            return Err(invalid("layout", "start and goal must lie inside the grid"));
        }
        if self.cliff.contains(&self.start) || self.cliff.contains(&self.goal) {
            return Err(invalid("layout", "start and goal cannot be cliff cells"));
        }
        if !(0.0..=1.0).contains(&self.slip_prob) {
            return Err(invalid("slip_prob", "must lie in [0, 1]"));
        }
        Ok(())
    }

    pub fn index(&self, (r, c): Cell) -> usize {
        r * self.width + c
    }

    /// Destination of a move; leaving the grid or entering a wall is blocked.
    pub fn target(&self, (r, c): Cell, mv: Move) -> Cell {
        let (dr, dc) = mv.delta();
        let nr = r as isize + dr;
        let nc = c as isize + dc;
        if nr < 0 || nc < 0 || nr >= self.height as isize || nc >= self.width as isize {
            return (r, c);
        }
        let next = (nr as usize, nc as usize);
        if self.walls.contains(&next) {
            (r, c)
        } else {
            next
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CliffParams {
    pub slip_prob: f64,
    pub max_episode_steps: usize,
}

impl Default for CliffParams {
    fn default() -> Self {
        CliffParams {
            slip_prob: 0.01,
            max_episode_steps: 200,
        }
    }
}

/// Goal-only Cliff Walking: +1 at the goal (absorbing), -1 for stepping into
/// the cliff, which sends the agent back to start without ending the episode.
pub struct Cliff {
    layout: GridWorldLayout,
    spec: EnvSpec,
    position: Cell,
    clock: EpisodeClock,
}

impl Cliff {
    pub fn new(params: CliffParams) -> Result<Self> {
        Self::with_layout(
            GridWorldLayout::cliff_walking(params.slip_prob),
            params.max_episode_steps,
        )
    }

    pub fn with_layout(layout: GridWorldLayout, max_episode_steps: usize) -> Result<Self> {
        layout.validate()?;
        let spec = EnvSpec {
            state_dim: 2,
            action_kind: ActionKind::Discrete(4),
            max_episode_steps,
            state_bounds: vec![
                (0.0, (layout.height - 1).max(1) as f64),
                (0.0, (layout.width - 1).max(1) as f64),
            ],
            n_states: Some(layout.width * layout.height),
        };
        spec.validate()?;
        Ok(Cliff {
            position: layout.start,
            layout,
            spec,
            clock: EpisodeClock::default(),
        })
    }

    pub fn layout(&self) -> &GridWorldLayout {
        &self.layout
    }

    pub fn observe(&self, cell: Cell) -> State {
        State::discrete(
            self.spec.normalize(&[cell.0 as f64, cell.1 as f64]),
            self.layout.index(cell),
        )
    }
}

impl Environment for Cliff {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, _rng: &mut RunRng) -> State {
        self.clock.reset();
        self.position = self.layout.start;
        self.observe(self.position)
    }

    fn step(&mut self, action: &Action, rng: &mut RunRng) -> Result<Transition> {
        self.clock.ensure_running()?;
        self.spec.action_kind.check(action)?;
        let mut mv = Move::from_index(action.discrete().expect("checked")).expect("checked");
        if self.layout.slip_prob > 0.0 && rng.random::<f64>() < self.layout.slip_prob {
            mv = Move::ALL[rng.random_range(0..4)];
        }
        let state = self.observe(self.position);
        let target = self.layout.target(self.position, mv);
        let (next, reward, absorbed) = if self.layout.cliff.contains(&target) {
            (self.layout.start, -1.0, false)
        } else if target == self.layout.goal {
            (target, 1.0, true)
        } else {
            (target, 0.0, false)
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
