//! Tabular Q-learning agents: an ε-greedy baseline, an agent that folds a
//! count bonus into its reward, and an agent that learns the bonus in its own
//! exploration channel `U`.

use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::mdp::{Action, Agent, RunRng, State, StepInfo, Transition};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawValueTable")]
pub struct ValueTable {
    n_states: usize,
    n_actions: usize,
    values: Vec<f64>,
}

#[derive(Deserialize)]
struct RawValueTable {
    n_states: usize,
    n_actions: usize,
    values: Vec<f64>,
}

impl TryFrom<RawValueTable> for ValueTable {
    type Error = Error;

    fn try_from(raw: RawValueTable) -> Result<Self> {
        let mut table = ValueTable::new(raw.n_states, raw.n_actions, 0.0)?;
        if raw.values.len() != table.values.len() {
            return Err(Error::DimensionMismatch {
                expected: table.values.len(),
                got: raw.values.len(),
            });
        }
        if raw.values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("values", "must be finite"));
        }
        table.values = raw.values;
        Ok(table)
    }
}

impl ValueTable {
    pub fn new(n_states: usize, n_actions: usize, init: f64) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(invalid("table", "need at least one state and one action"));
        }
        if !init.is_finite() {
            return Err(invalid("init", "must be finite"));
        }
        Ok(ValueTable {
            n_states,
            n_actions,
            values: vec![init; n_states * n_actions],
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    fn offset(&self, s: usize, a: usize) -> Result<usize> {
        if s >= self.n_states {
            return Err(Error::InvalidState(format!("state {s} outside 0..{}", self.n_states)));
        }
        if a >= self.n_actions {
            return Err(Error::InvalidAction(format!("action {a} outside 0..{}", self.n_actions)));
        }
        Ok(s * self.n_actions + a)
    }

    pub fn get(&self, s: usize, a: usize) -> Result<f64> {
        Ok(self.values[self.offset(s, a)?])
    }

    pub fn set(&mut self, s: usize, a: usize, value: f64) -> Result<()> {
        let i = self.offset(s, a)?;
        self.values[i] = value;
        Ok(())
    }

    pub fn row(&self, s: usize) -> Result<&[f64]> {
        self.offset(s, 0)?;
        Ok(&self.values[s * self.n_actions..(s + 1) * self.n_actions])
    }

    pub fn max(&self, s: usize) -> Result<f64> {
        Ok(self.row(s)?.iter().copied().fold(f64::NEG_INFINITY, f64::max))
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn scale(&mut self, factor: f64) {
        self.values.iter_mut().for_each(|v| *v *= factor);
    }

    /// Move `Q(s, a)` a fraction `lr` toward `target`.
    pub fn update(&mut self, s: usize, a: usize, target: f64, lr: f64) -> Result<()> {
        let i = self.offset(s, a)?;
        let v = self.values[i] + lr * (target - self.values[i]);
        if !v.is_finite() {
            return Err(invalid("target", "update produced a non-finite value"));
        }
        self.values[i] = v;
        Ok(())
    }

    /// Whitespace-separated matrix, one line per state.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for s in 0..self.n_states {
            let row = &self.values[s * self.n_actions..(s + 1) * self.n_actions];
            let line: Vec<String> = row.iter().map(|v| format!("{v:.6e}")).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountTable {
    n_actions: usize,
    counts: Vec<u64>,
}

impl CountTable {
    pub fn new(n_states: usize, n_actions: usize) -> Self {
        CountTable {
            n_actions,
            counts: vec![0; n_states * n_actions],
        }
    }

    pub fn get(&self, s: usize, a: usize) -> u64 {
        self.counts.get(s * self.n_actions + a).copied().unwrap_or(0)
    }

    pub fn increment(&mut self, s: usize, a: usize) -> Result<()> {
        let slot = self
            .counts
            .get_mut(s * self.n_actions + a)
            .ok_or_else(|| Error::InvalidState(format!("(state {s}, action {a}) out of range")))?;
        *slot += 1;
        Ok(())
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// 0 for a first visit of (s, a), −1 for every revisit.
pub fn count_bonus(counts: &CountTable, s: usize, a: usize) -> f64 {
    if counts.get(s, a) == 0 {
        0.0
    } else {
        -1.0
    }
}

/// One Q-learning step toward `r + γ·c·max_a' Q(s', a')`.
pub fn q_update(
    table: &mut ValueTable,
    s: usize,
    a: usize,
    reward: f64,
    next_s: usize,
    continuation: f64,
    lr: f64,
    gamma: f64,
) -> Result<()> {
    let boot = if continuation == 0.0 { 0.0 } else { continuation * table.max(next_s)? };
    table.update(s, a, reward + gamma * boot, lr)
}

/// First index among the maxima of `score(a)`.
pub fn argmax_first(n: usize, score: impl Fn(usize) -> f64) -> usize {
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    for a in 0..n {
        let v = score(a);
        if v > best_v {
            best = a;
            best_v = v;
        }
    }
    best
}

/// Uniformly chosen index among the maxima of `values`.
fn argmax_random_tie(values: &[f64], rng: &mut RunRng) -> usize {
    let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ties: Vec<usize> = (0..values.len()).filter(|&a| values[a] == best).collect();
    ties[rng.random_range(0..ties.len())]
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TabularParams {
    pub learning_rate: f64,
    pub gamma: f64,
    /// Exploration weight when no schedule overrides it.
    pub weight: Option<f64>,
}

impl Default for TabularParams {
    fn default() -> Self {
        TabularParams {
            learning_rate: 0.1,
            gamma: 0.99,
            weight: None,
        }
    }
}

impl TabularParams {
    fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(invalid("learning_rate", "must lie in (0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(invalid("gamma", "must lie in [0, 1]"));
        }
        if let Some(w) = self.weight {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(invalid("weight", "must be non-negative and finite"));
            }
        }
        Ok(())
    }
}

fn discrete_action(t: &Transition) -> Result<usize> {
    t.action
        .discrete()
        .ok_or_else(|| Error::InvalidAction("tabular agents need discrete actions".into()))
}

/// Plain Q-learning with ε-greedy action selection; `weight` is ε.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsilonGreedyAgent {
    q: ValueTable,
    params: TabularParams,
}

impl EpsilonGreedyAgent {
    pub const DEFAULT_EPSILON: f64 = 0.1;

    pub fn new(n_states: usize, n_actions: usize, params: TabularParams) -> Result<Self> {
        params.validate()?;
        if params.weight.is_some_and(|e| e > 1.0) {
            return Err(invalid("weight", "ε must lie in [0, 1]"));
        }
        Ok(EpsilonGreedyAgent {
            q: ValueTable::new(n_states, n_actions, 0.0)?,
            params,
        })
    }

    pub fn q(&self) -> &ValueTable {
        &self.q
    }
}

impl Agent for EpsilonGreedyAgent {
    fn act(&self, state: &State, weight: f64, rng: &mut RunRng) -> Result<Action> {
        let s = state.require_index()?;
        let n = self.q.n_actions();
        let eps = weight.clamp(0.0, 1.0);
        if eps > 0.0 && rng.random::<f64>() < eps {
            return Ok(Action::Discrete(rng.random_range(0..n)));
        }
        Ok(Action::Discrete(argmax_random_tie(self.q.row(s)?, rng)))
    }

    fn observe(&mut self, t: &Transition, _weight: f64, _rng: &mut RunRng) -> Result<StepInfo> {
        let (s, a, s2) = (t.state.require_index()?, discrete_action(t)?, t.next_state.require_index()?);
        let p = self.params;
        q_update(&mut self.q, s, a, t.reward, s2, t.continuation(), p.learning_rate, p.gamma)?;
        Ok(StepInfo::default())
    }

    fn default_weight(&self) -> f64 {
        self.params.weight.unwrap_or(Self::DEFAULT_EPSILON)
    }
}

/// Greedy Q-learning on `r + ξ·bonus`; `weight` is ξ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdditiveAgent {
    q: ValueTable,
    counts: CountTable,
    params: TabularParams,
}

impl AdditiveAgent {
    pub fn new(n_states: usize, n_actions: usize, params: TabularParams) -> Result<Self> {
        params.validate()?;
        Ok(AdditiveAgent {
            q: ValueTable::new(n_states, n_actions, 0.0)?,
            counts: CountTable::new(n_states, n_actions),
            params,
        })
    }

    pub fn q(&self) -> &ValueTable {
        &self.q
    }

    pub fn counts(&self) -> &CountTable {
        &self.counts
    }
}

impl Agent for AdditiveAgent {
    fn act(&self, state: &State, _weight: f64, _rng: &mut RunRng) -> Result<Action> {
        let row = self.q.row(state.require_index()?)?;
        Ok(Action::Discrete(argmax_first(row.len(), |a| row[a])))
    }

    fn observe(&mut self, t: &Transition, weight: f64, _rng: &mut RunRng) -> Result<StepInfo> {
        let (s, a, s2) = (t.state.require_index()?, discrete_action(t)?, t.next_state.require_index()?);
        let bonus = count_bonus(&self.counts, s, a);
        self.counts.increment(s, a)?;
        let p = self.params;
        let total = t.reward + weight * bonus;
        q_update(&mut self.q, s, a, total, s2, t.continuation(), p.learning_rate, p.gamma)?;
        Ok(StepInfo {
            exploration_reward: Some(bonus),
            ..Default::default()
        })
    }

    fn default_weight(&self) -> f64 {
        self.params.weight.unwrap_or(1.0)
    }
}

/// Separate exploitation and exploration tables, acting on `Q + κU`;
/// `weight` is κ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExplorationValuesAgent {
    q: ValueTable,
    u: ValueTable,
    counts: CountTable,
    params: TabularParams,
}

impl ExplorationValuesAgent {
    pub fn new(n_states: usize, n_actions: usize, params: TabularParams) -> Result<Self> {
        params.validate()?;
        Ok(ExplorationValuesAgent {
            q: ValueTable::new(n_states, n_actions, 0.0)?,
            u: ValueTable::new(n_states, n_actions, 0.0)?,
            counts: CountTable::new(n_states, n_actions),
            params,
        })
    }

    pub fn q(&self) -> &ValueTable {
        &self.q
    }

    pub fn u(&self) -> &ValueTable {
        &self.u
    }

    pub fn counts(&self) -> &CountTable {
        &self.counts
    }

    /// `argmax_a Q(s, a) + κ U(s, a)`, lowest index on ties.
    pub fn balanced_action(&self, s: usize, kappa: f64) -> Result<usize> {
        let q = self.q.row(s)?;
        let u = self.u.row(s)?;
        Ok(if kappa == 0.0 {
            argmax_first(q.len(), |a| q[a])
        } else {
            argmax_first(q.len(), |a| q[a] + kappa * u[a])
        })
    }

    /// Update both channels from one transition with an explicit exploration
    /// reward.
    pub fn update_channels(&mut self, t: &Transition, exploration_reward: f64) -> Result<()> {
        let (s, a, s2) = (t.state.require_index()?, discrete_action(t)?, t.next_state.require_index()?);
        let p = self.params;
        let c = t.continuation();
        q_update(&mut self.q, s, a, t.reward, s2, c, p.learning_rate, p.gamma)?;
        q_update(&mut self.u, s, a, exploration_reward, s2, c, p.learning_rate, p.gamma)
    }
}

impl Agent for ExplorationValuesAgent {
    fn act(&self, state: &State, weight: f64, _rng: &mut RunRng) -> Result<Action> {
        Ok(Action::Discrete(self.balanced_action(state.require_index()?, weight)?))
    }

    fn observe(&mut self, t: &Transition, _weight: f64, _rng: &mut RunRng) -> Result<StepInfo> {
        let (s, a) = (t.state.require_index()?, discrete_action(t)?);
        let bonus = count_bonus(&self.counts, s, a);
        self.counts.increment(s, a)?;
        self.update_channels(t, bonus)?;
        Ok(StepInfo {
            exploration_reward: Some(bonus),
            ..Default::default()
        })
    }

    fn default_weight(&self) -> f64 {
        self.params.weight.unwrap_or(1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn transition(s: usize, a: usize, r: f64, s2: usize, terminal: bool) -> Transition {
        Transition {
            state: State::discrete(vec![0.0], s),
            action: Action::Discrete(a),
            reward: r,
            next_state: State::discrete(vec![0.0], s2),
            terminal,
            truncated: false,
        }
    }

    #[test]
    fn bonus_is_binary() {
        let mut counts = CountTable::new(2, 2);
        assert_eq!(count_bonus(&counts, 1, 0), 0.0);
        counts.increment(1, 0).unwrap();
        assert_eq!(count_bonus(&counts, 1, 0), -1.0);
        for _ in 0..99 {
            counts.increment(1, 0).unwrap();
        }
        assert_eq!(count_bonus(&counts, 1, 0), -1.0);
        assert_eq!(counts.get(1, 0), 100);
    }

    #[test]
    fn terminal_goal_update() {
        let mut q = ValueTable::new(2, 2, 0.0).unwrap();
        q_update(&mut q, 0, 1, 1.0, 1, 0.0, 0.1, 0.9).unwrap();
        assert!((q.get(0, 1).unwrap() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn zero_table_is_a_fixed_point() {
        let mut q = ValueTable::new(3, 2, 0.0).unwrap();
        q_update(&mut q, 1, 0, 0.0, 2, 1.0, 0.1, 0.9).unwrap();
        assert!(q.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn truncation_keeps_bootstrap() {
        let mut q = ValueTable::new(2, 1, 0.0).unwrap();
        q.set(1, 0, 1.0).unwrap();
        let mut t = transition(0, 0, 0.0, 1, true);
        t.truncated = true;
        q_update(&mut q, 0, 0, t.reward, 1, t.continuation(), 1.0, 0.5).unwrap();
        assert_eq!(q.get(0, 0).unwrap(), 0.5);
    }

    #[test]
    fn text_dump_has_one_line_per_state() {
        let q = ValueTable::new(3, 2, 0.5).unwrap();
        let text = q.to_text();
        assert_eq!(text.lines().count(), 3);
        assert!(text.lines().all(|l| l.split_whitespace().count() == 2));
    }

    #[test]
    fn balanced_action_examples() {
        let mut agent = ExplorationValuesAgent::new(1, 2, TabularParams::default()).unwrap();
        agent.q.set(0, 0, 1.0).unwrap();
        agent.u.set(0, 1, 0.5).unwrap();
        assert_eq!(agent.balanced_action(0, 1.0).unwrap(), 0);
        assert_eq!(agent.balanced_action(0, 3.0).unwrap(), 1);
        assert_eq!(agent.balanced_action(0, 0.0).unwrap(), 0);
        // equal Q, distinct U
        agent.q.set(0, 0, 0.0).unwrap();
        assert_eq!(agent.balanced_action(0, 0.1).unwrap(), 1);
        // all ties → lowest index
        agent.u.set(0, 1, 0.0).unwrap();
        assert_eq!(agent.balanced_action(0, 1.0).unwrap(), 0);
    }

    #[test]
    fn additive_total_reward() {
        let mut rng = RunRng::seed_from_u64(0);
        let params = TabularParams {
            learning_rate: 1.0,
            gamma: 0.0,
            weight: None,
        };
        let mut agent = AdditiveAgent::new(2, 2, params).unwrap();
        let t = transition(0, 1, 0.0, 1, false);
        agent.observe(&t, 1.0, &mut rng).unwrap();
        assert_eq!(agent.q().get(0, 1).unwrap(), 0.0);
        let t = transition(0, 1, 1.0, 1, false);
        agent.observe(&t, 1.0, &mut rng).unwrap();
        assert_eq!(agent.q().get(0, 1).unwrap(), 0.0);
    }

    #[test]
    fn additive_with_zero_xi_is_plain_q_learning() {
        let mut rng = RunRng::seed_from_u64(0);
        let mut agent = AdditiveAgent::new(3, 2, TabularParams::default()).unwrap();
        let mut plain = ValueTable::new(3, 2, 0.0).unwrap();
        let steps = [(0, 1, 0.0, 1, false), (1, 1, 0.0, 2, false), (1, 1, 1.0, 2, true), (0, 1, 0.0, 1, false)];
        for &(s, a, r, s2, term) in &steps {
            let t = transition(s, a, r, s2, term);
            agent.observe(&t, 0.0, &mut rng).unwrap();
            q_update(&mut plain, s, a, r, s2, t.continuation(), 0.1, 0.99).unwrap();
        }
        assert_eq!(agent.q(), &plain);
    }

    #[test]
    fn epsilon_zero_is_greedy() {
        let mut rng = RunRng::seed_from_u64(1);
        let mut agent = EpsilonGreedyAgent::new(1, 3, TabularParams::default()).unwrap();
        agent.q.set(0, 2, 1.0).unwrap();
        let s = State::discrete(vec![0.0], 0);
        for _ in 0..100 {
            assert_eq!(agent.act(&s, 0.0, &mut rng).unwrap(), Action::Discrete(2));
        }
    }

    #[test]
    fn epsilon_one_is_uniform() {
        let mut rng = RunRng::seed_from_u64(2);
        let mut agent = EpsilonGreedyAgent::new(1, 4, TabularParams::default()).unwrap();
        agent.q.set(0, 0, 5.0).unwrap();
        let s = State::discrete(vec![0.0], 0);
        let n = 10_000;
        let mut freq = [0usize; 4];
        for _ in 0..n {
            freq[agent.act(&s, 1.0, &mut rng).unwrap().discrete().unwrap()] += 1;
        }
        let p = 0.25;
        let sd = (n as f64 * p * (1.0 - p)).sqrt();
        for f in freq {
            assert!((f as f64 - n as f64 * p).abs() < 3.0 * sd, "{freq:?}");
        }
    }

    #[test]
    fn reward_scaling_leaves_exploration_channel_unchanged() {
        let mut rng = RunRng::seed_from_u64(0);
        let mut a = ExplorationValuesAgent::new(3, 2, TabularParams::default()).unwrap();
        let mut b = a.clone();
        let steps = [(0, 1, 0.0, 1, false), (1, 0, -1.0, 0, false), (0, 1, 0.0, 1, false), (1, 1, 1.0, 2, true)];
        for &(s, act, r, s2, term) in &steps {
            a.observe(&transition(s, act, r, s2, term), 1.0, &mut rng).unwrap();
            b.observe(&transition(s, act, 100.0 * r, s2, term), 1.0, &mut rng).unwrap();
        }
        assert_eq!(a.u(), b.u());
        let mut scaled = a.q().clone();
        scaled.scale(100.0);
        for (x, y) in scaled.values().iter().zip(b.q().values()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn invalid_params() {
        let bad = TabularParams {
            learning_rate: 0.0,
            ..Default::default()
        };
        assert!(ExplorationValuesAgent::new(2, 2, bad).is_err());
        let bad_eps = TabularParams {
            weight: Some(1.5),
            ..Default::default()
        };
        assert!(EpsilonGreedyAgent::new(2, 2, bad_eps).is_err());
        assert!(ValueTable::new(0, 2, 0.0).is_err());
    }
}
