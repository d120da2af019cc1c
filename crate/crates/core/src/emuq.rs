//! Bayesian exploration agent over random Fourier features.
//!
//! `Q` and `U` are Bayesian linear regressions sharing one covariance. The
//! exploration reward at a state is the mean predictive variance over actions
//! minus its maximum `V_max`, so it is never positive and only reaches 0 where
//! nothing is known. The agent acts greedily on `Q + κU`.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bayes::{
    episode_sweep, variance_from_quadratic, vmax, PosteriorState, SweepSettings, TransitionStore,
    VarianceForm,
};
use crate::error::{check_dim, invalid, Error, Result};
use crate::features::{ActionEncoding, JointRff, Phases, SamplingScheme};
use crate::mdp::{
    Action, ActionKind, Agent, EnvSpec, EpisodeReport, RunRng, State, StepInfo, Transition,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmuqConfig {
    pub gamma: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Length of the feature vector; half as many spectral samples.
    pub n_features: usize,
    pub state_lengthscale: f64,
    pub action_lengthscale: f64,
    pub sampling: SamplingScheme,
    /// Fixed seed for the feature map; the run seed is used when absent.
    pub feature_seed: Option<u64>,
    /// Random actions scored per decision in continuous action spaces.
    pub n_action_candidates: usize,
    /// Uniform actions averaged over in the exploration reward.
    pub n_expectation_samples: usize,
    pub variance_form: VarianceForm,
    /// Exploration weight; `1 / V_max` when absent.
    pub kappa: Option<f64>,
    /// Replace the variance-based exploration reward by a constant.
    pub exploration_reward_override: Option<f64>,
    pub sweep_tolerance: f64,
    pub sweep_max_iters: usize,
}

impl Default for EmuqConfig {
    fn default() -> Self {
        EmuqConfig {
            gamma: 0.99,
            alpha: 0.1,
            beta: 1.0,
            n_features: 300,
            state_lengthscale: 0.3,
            action_lengthscale: 0.3,
            sampling: SamplingScheme::QuasiRandom,
            feature_seed: None,
            n_action_candidates: 100,
            n_expectation_samples: 64,
            variance_form: VarianceForm::Epistemic,
            kappa: None,
            exploration_reward_override: None,
            sweep_tolerance: 1e-6,
            sweep_max_iters: 200,
        }
    }
}

impl EmuqConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(invalid("gamma", "must lie in [0, 1)"));
        }
        if self.n_action_candidates == 0 {
            return Err(invalid("n_action_candidates", "must be at least 1"));
        }
        if self.n_expectation_samples == 0 {
            return Err(invalid("n_expectation_samples", "must be at least 1"));
        }
        if let Some(k) = self.kappa {
            if !(k >= 0.0 && k.is_finite()) {
                return Err(invalid("kappa", "must be non-negative and finite"));
            }
        }
        if let Some(r) = self.exploration_reward_override {
            if !(r <= 0.0 && r.is_finite()) {
                return Err(invalid("exploration_reward_override", "must be finite and ≤ 0"));
            }
        }
        if !(self.sweep_tolerance > 0.0) {
            return Err(invalid("sweep_tolerance", "must be positive"));
        }
        Ok(())
    }

    fn sweep_settings(&self) -> SweepSettings {
        SweepSettings {
            gamma: self.gamma,
            tolerance: self.sweep_tolerance,
            max_iters: self.sweep_max_iters,
        }
    }
}

/// A set of actions with their precomputed action phases.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct ActionSet {
    actions: Vec<Action>,
    /// Shape (actions, J).
    cos: Array2<f64>,
    sin: Array2<f64>,
}

impl ActionSet {
    fn new(features: &JointRff, actions: Vec<Action>) -> Result<Self> {
        let d = features.encoding().dim();
        let mut encoded = Array2::zeros((actions.len(), d));
        for (k, a) in actions.iter().enumerate() {
            let e = features.encoding().encode(a)?;
            encoded.row_mut(k).assign(&ArrayView1::from(&e[..]));
        }
        let phases = encoded.dot(&features.action_frequencies());
        Ok(ActionSet {
            actions,
            cos: phases.mapv(f64::cos),
            sin: phases.mapv(f64::sin),
        })
    }

    fn len(&self) -> usize {
        self.actions.len()
    }
}

/// Second moments of the action cosines/sines over the expectation set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct ActionMoments {
    cc: Array2<f64>,
    cs: Array2<f64>,
    sc: Array2<f64>,
    ss: Array2<f64>,
}

impl ActionMoments {
    fn new(set: &ActionSet) -> Self {
        let n = set.len() as f64;
        let cs = set.cos.t().dot(&set.sin) / n;
        ActionMoments {
            cc: set.cos.t().dot(&set.cos) / n,
            sc: cs.t().as_standard_layout().into_owned(),
            cs,
            ss: set.sin.t().dot(&set.sin) / n,
        }
    }
}

/// Weights turning state cosines/sines into `E_a[φᵀSφ]`.
struct QuadraticWeights {
    cc: Array2<f64>,
    cs: Array2<f64>,
    sc: Array2<f64>,
    ss: Array2<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmuqAgent {
    config: EmuqConfig,
    action_kind: ActionKind,
    features: JointRff,
    posterior: PosteriorState,
    store: TransitionStore,
    expectation: ActionSet,
    moments: ActionMoments,
}

/// What survives a checkpoint: everything needed to predict and act. The
/// transition store is dropped, so a restored agent sweeps only over
/// transitions it sees after loading.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmuqSnapshot {
    pub config: EmuqConfig,
    pub action_kind: ActionKind,
    pub features: JointRff,
    pub posterior: PosteriorState,
    pub expectation_actions: Vec<Action>,
}

fn uniform_action(low: &[f64], high: &[f64], rng: &mut RunRng) -> Action {
    Action::Continuous(
        low.iter()
            .zip(high)
            .map(|(&l, &h)| l + (h - l) * rng.random::<f64>())
            .collect(),
    )
}

impl EmuqAgent {
    /// `rng` draws the continuous expectation actions; `seed` fixes the
    /// feature map unless the config overrides it.
    pub fn new(spec: &EnvSpec, config: EmuqConfig, seed: u64, rng: &mut RunRng) -> Result<Self> {
        config.validate()?;
        spec.validate()?;
        let encoding = ActionEncoding::for_kind(&spec.action_kind);
        let features = JointRff::new(
            spec.state_dim,
            encoding,
            config.state_lengthscale,
            config.action_lengthscale,
            config.n_features,
            config.sampling,
            config.feature_seed.unwrap_or(seed),
        )?;
        let posterior = PosteriorState::new(config.alpha, config.beta, config.n_features)?;
        let actions = match &spec.action_kind {
            ActionKind::Discrete(n) => (0..*n).map(Action::Discrete).collect(),
            ActionKind::Box { low, high } => (0..config.n_expectation_samples)
                .map(|_| uniform_action(low, high, rng))
                .collect(),
        };
        let expectation = ActionSet::new(&features, actions)?;
        let moments = ActionMoments::new(&expectation);
        Ok(EmuqAgent {
            store: TransitionStore::new(config.n_features),
            action_kind: spec.action_kind.clone(),
            config,
            features,
            posterior,
            expectation,
            moments,
        })
    }

    pub fn snapshot(&self) -> EmuqSnapshot {
        EmuqSnapshot {
            config: self.config.clone(),
            action_kind: self.action_kind.clone(),
            features: self.features.clone(),
            posterior: self.posterior.clone(),
            expectation_actions: self.expectation.actions.clone(),
        }
    }

    pub fn restore(snapshot: EmuqSnapshot) -> Result<Self> {
        let EmuqSnapshot {
            config,
            action_kind,
            features,
            posterior,
            expectation_actions,
        } = snapshot;
        config.validate()?;
        check_dim(config.n_features, features.n_features())?;
        check_dim(features.state_dim() + features.encoding().dim(), features.input_dim())?;
        check_dim(config.n_features, posterior.dim())?;
        let m = config.n_features;
        if posterior.covariance().dim() != (m, m)
            || [posterior.mean_q(), posterior.mean_u(), posterior.target_q(), posterior.target_u()]
                .iter()
                .any(|v| v.len() != m)
        {
            return Err(invalid("posterior", "covariance and mean shapes disagree"));
        }
        if ActionEncoding::for_kind(&action_kind) != *features.encoding() {
            return Err(invalid("action_kind", "does not match the feature map encoding"));
        }
        if expectation_actions.is_empty() {
            return Err(invalid("expectation_actions", "must not be empty"));
        }
        for a in &expectation_actions {
            action_kind.check(a)?;
        }
        let expectation = ActionSet::new(&features, expectation_actions)?;
        let moments = ActionMoments::new(&expectation);
        Ok(EmuqAgent {
            store: TransitionStore::new(config.n_features),
            action_kind,
            config,
            features,
            posterior,
            expectation,
            moments,
        })
    }

    pub fn config(&self) -> &EmuqConfig {
        &self.config
    }

    pub fn features(&self) -> &JointRff {
        &self.features
    }

    pub fn posterior(&self) -> &PosteriorState {
        &self.posterior
    }

    pub fn store(&self) -> &TransitionStore {
        &self.store
    }

    pub fn vmax(&self) -> f64 {
        vmax(self.config.alpha, self.config.beta, self.config.variance_form)
    }

    pub fn kappa(&self) -> f64 {
        self.config.kappa.unwrap_or(1.0 / self.vmax())
    }

    pub fn expectation_actions(&self) -> &[Action] {
        &self.expectation.actions
    }

    pub fn embed(&self, state: &State, action: &Action) -> Result<Array1<f64>> {
        self.features.embed(&state.values, action)
    }

    pub fn q_value(&self, state: &State, action: &Action) -> Result<f64> {
        self.posterior.predict_q(self.embed(state, action)?.view())
    }

    pub fn u_value(&self, state: &State, action: &Action) -> Result<f64> {
        self.posterior.predict_u(self.embed(state, action)?.view())
    }

    pub fn predict_var(&self, state: &State, action: &Action) -> Result<f64> {
        let phi = self.embed(state, action)?;
        self.posterior.predict_var(phi.view(), self.config.variance_form)
    }

    fn quadratic_weights(&self) -> QuadraticWeights {
        let j = self.features.n_spectral();
        let s = self.posterior.covariance();
        let scc = s.slice(s![..j, ..j]);
        let scs = s.slice(s![..j, j..]);
        let ssc = s.slice(s![j.., ..j]);
        let sss = s.slice(s![j.., j..]);
        let m = &self.moments;
        let scale = 1.0 / j as f64;
        QuadraticWeights {
            cc: (&scc * &m.cc + &scs * &m.cs + &ssc * &m.sc + &sss * &m.ss) * scale,
            cs: (&scs * &m.cc - &scc * &m.cs - &ssc * &m.ss + &sss * &m.sc) * scale,
            sc: (&ssc * &m.cc - &scc * &m.sc - &scs * &m.ss + &sss * &m.cs) * scale,
            ss: (&scc * &m.ss - &scs * &m.sc - &ssc * &m.cs + &sss * &m.cc) * scale,
        }
    }

    /// Row-wise `E_a[φᵀSφ]` for states given by their phase cosines/sines.
    fn expected_quadratic(w: &QuadraticWeights, cu: ArrayView2<f64>, su: ArrayView2<f64>) -> Array1<f64> {
        let left = cu.dot(&w.cc) + su.dot(&w.sc);
        let right = cu.dot(&w.cs) + su.dot(&w.ss);
        (&left * &cu).sum_axis(Axis(1)) + (&right * &su).sum_axis(Axis(1))
    }

    fn reward_from_quadratic(&self, q: f64) -> f64 {
        let vmax = self.vmax();
        let v = variance_from_quadratic(q, self.config.beta, self.config.variance_form);
        // rounding can push the mean a hair past the analytic bounds
        (v - vmax).clamp(-vmax, 0.0)
    }

    /// Mean predictive variance over the expectation actions minus `V_max`.
    pub fn exploration_reward(&self, state: &State) -> Result<f64> {
        if let Some(r) = self.config.exploration_reward_override {
            return Ok(r);
        }
        let p = Phases::of(self.features.state_phases(&state.values)?.view());
        Ok(self.reward_from_quadratic(self.expected_quadratic_at(&p)))
    }

    /// `E_a[φᵀSφ]` at one state, fused over the blocks of `S` to avoid
    /// forming the weight matrices.
    fn expected_quadratic_at(&self, p: &Phases) -> f64 {
        let j = self.features.n_spectral();
        let s = self.posterior.covariance();
        let m = &self.moments;
        let (cu, su) = (p.cos.as_slice().unwrap(), p.sin.as_slice().unwrap());
        let mut total = 0.0;
        for r in 0..j {
            let (top, bottom) = (s.row(r), s.row(j + r));
            let (top, bottom) = (top.as_slice().unwrap(), bottom.as_slice().unwrap());
            let (mcc, mcs) = (m.cc.row(r), m.cs.row(r));
            let (msc, mss) = (m.sc.row(r), m.ss.row(r));
            let (mcc, mcs) = (mcc.as_slice().unwrap(), mcs.as_slice().unwrap());
            let (msc, mss) = (msc.as_slice().unwrap(), mss.as_slice().unwrap());
            let (a, b) = (cu[r], su[r]);
            let mut acc = 0.0;
            for k in 0..j {
                let (scc, scs) = (top[k], top[j + k]);
                let (ssc, sss) = (bottom[k], bottom[j + k]);
                let w_cc = scc * mcc[k] + scs * mcs[k] + ssc * msc[k] + sss * mss[k];
                let w_cs = scs * mcc[k] - scc * mcs[k] - ssc * mss[k] + sss * msc[k];
                let w_sc = ssc * mcc[k] - scc * msc[k] - scs * mss[k] + sss * mcs[k];
                let w_ss = scc * mss[k] - scs * msc[k] - ssc * mcs[k] + sss * mcc[k];
                acc += (a * w_cc + b * w_sc) * cu[k] + (a * w_cs + b * w_ss) * su[k];
            }
            total += acc;
        }
        total / j as f64
    }

    /// Same quantity as [`EmuqAgent::exploration_reward`] by explicit
    /// enumeration of the expectation actions.
    pub fn exploration_reward_enumerated(&self, state: &State) -> Result<f64> {
        if let Some(r) = self.config.exploration_reward_override {
            return Ok(r);
        }
        let mut total = 0.0;
        for a in &self.expectation.actions {
            total += self.posterior.quadratic(self.embed(state, a)?.view())?;
        }
        Ok(self.reward_from_quadratic(total / self.expectation.len() as f64))
    }

    /// Candidate actions for one decision.
    pub fn candidates(&self, rng: &mut RunRng) -> Vec<Action> {
        match &self.action_kind {
            ActionKind::Discrete(n) => (0..*n).map(Action::Discrete).collect(),
            ActionKind::Box { low, high } => {
                let mut out: Vec<Action> = (0..self.config.n_action_candidates)
                    .map(|_| uniform_action(low, high, rng))
                    .collect();
                if low.len() == 1 {
                    out.push(Action::Continuous(low.clone()));
                    out.push(Action::Continuous(high.clone()));
                }
                out
            }
        }
    }

    fn candidate_set(&self, rng: &mut RunRng) -> Result<ActionSet> {
        match &self.action_kind {
            ActionKind::Discrete(_) => Ok(self.expectation.clone()),
            ActionKind::Box { .. } => ActionSet::new(&self.features, self.candidates(rng)),
        }
    }

    fn balanced_weights(&self, kappa: f64) -> Array1<f64> {
        let mut w = self.posterior.mean_q().clone();
        if kappa != 0.0 {
            w.scaled_add(kappa, self.posterior.mean_u());
        }
        w
    }

    /// Per-state coefficient rows so that `value = P·cvᵀ + R·svᵀ`.
    fn value_coefficients(
        weights: &Array1<f64>,
        cu: ArrayView2<f64>,
        su: ArrayView2<f64>,
    ) -> (Array2<f64>, Array2<f64>) {
        let j = cu.ncols();
        let scale = 1.0 / (j as f64).sqrt();
        let mc = weights.slice(s![..j]);
        let ms = weights.slice(s![j..]);
        let p = (&cu * &mc + &su * &ms) * scale;
        let r = (&cu * &ms - &su * &mc) * scale;
        (p, r)
    }

    fn first_argmax(values: ArrayView1<f64>) -> usize {
        let mut best = 0;
        let mut best_v = f64::NEG_INFINITY;
        for (k, &v) in values.iter().enumerate() {
            if v > best_v {
                best = k;
                best_v = v;
            }
        }
        best
    }

    /// Balanced values `Q + κU` of every action in `candidates` at `state`.
    pub fn balanced_values(&self, state: &State, kappa: f64, candidates: &[Action]) -> Result<Vec<f64>> {
        let set = ActionSet::new(&self.features, candidates.to_vec())?;
        let p = Phases::of(self.features.state_phases(&state.values)?.view());
        let (pc, rc) = Self::value_coefficients(
            &self.balanced_weights(kappa),
            p.cos.view().insert_axis(Axis(0)),
            p.sin.view().insert_axis(Axis(0)),
        );
        let values = pc.dot(&set.cos.t()) + rc.dot(&set.sin.t());
        Ok(values.row(0).to_vec())
    }

    fn greedy_in(&self, state: &State, kappa: f64, set: &ActionSet) -> Result<Action> {
        let p = Phases::of(self.features.state_phases(&state.values)?.view());
        let (pc, rc) = Self::value_coefficients(
            &self.balanced_weights(kappa),
            p.cos.view().insert_axis(Axis(0)),
            p.sin.view().insert_axis(Axis(0)),
        );
        let values = set.cos.dot(&pc.row(0)) + set.sin.dot(&rc.row(0));
        Ok(set.actions[Self::first_argmax(values.view())].clone())
    }

    /// Refit both channels on everything stored so far.
    fn sweep(&mut self, kappa: f64, rng: &mut RunRng) -> Result<EpisodeReport> {
        let n = self.store.len();
        if n == 0 {
            return Ok(EpisodeReport::default());
        }
        let j = self.features.n_spectral();
        let omega_s = self.features.state_frequencies();
        let next: Vec<f64> = self.store.next_states().iter().flatten().copied().collect();
        let next = Array2::from_shape_vec((n, self.features.state_dim()), next)
            .map_err(|e| Error::InvalidState(e.to_string()))?;
        let phases = next.dot(&omega_s);
        let cu = phases.mapv(f64::cos);
        let su = phases.mapv(f64::sin);

        let exploration_rewards = match self.config.exploration_reward_override {
            Some(r) => Array1::from_elem(n, r),
            None => {
                let w = self.quadratic_weights();
                Self::expected_quadratic(&w, cu.view(), su.view())
                    .mapv(|q| self.reward_from_quadratic(q))
            }
        };

        let set = self.candidate_set(rng)?;
        let (pc, rc) = Self::value_coefficients(&self.balanced_weights(kappa), cu.view(), su.view());
        let values = pc.dot(&set.cos.t()) + rc.dot(&set.sin.t());
        let scale = 1.0 / (j as f64).sqrt();
        let mut next_phi = Array2::zeros((n, 2 * j));
        for (i, row) in values.rows().into_iter().enumerate() {
            let k = Self::first_argmax(row);
            let (cv, sv) = (set.cos.row(k), set.sin.row(k));
            let mut out = next_phi.row_mut(i);
            for jj in 0..j {
                let (c, s) = (cu[[i, jj]], su[[i, jj]]);
                out[jj] = (c * cv[jj] - s * sv[jj]) * scale;
                out[j + jj] = (s * cv[jj] + c * sv[jj]) * scale;
            }
        }
        let report = episode_sweep(
            &mut self.posterior,
            self.store.features(),
            self.store.rewards(),
            exploration_rewards.view(),
            next_phi.view(),
            self.store.continuation(),
            self.config.sweep_settings(),
        )?;
        if report.q.rejected || report.u.rejected {
            log::warn!(
                "episode sweep diverged; kept previous weights (Q rejected {}, U rejected {})",
                report.q.rejected,
                report.u.rejected
            );
        } else if !report.converged() {
            log::debug!(
                "episode sweep stopped before converging (Q residual {:.3e}, U residual {:.3e})",
                report.q.residual,
                report.u.residual
            );
        }
        Ok(EpisodeReport { sweep: Some(report) })
    }
}

impl Agent for EmuqAgent {
    fn act(&self, state: &State, weight: f64, rng: &mut RunRng) -> Result<Action> {
        let set = self.candidate_set(rng)?;
        self.greedy_in(state, weight, &set)
    }

    fn observe(&mut self, t: &Transition, weight: f64, rng: &mut RunRng) -> Result<StepInfo> {
        let phi = self.embed(&t.state, &t.action)?;
        // unit-norm features bound the variance analytically; clamp rounding
        let variance = self
            .posterior
            .predict_var(phi.view(), self.config.variance_form)?
            .clamp(0.0, self.vmax());
        let r_e = self.exploration_reward(&t.next_state)?;
        let next_phi = if t.absorbing() {
            None
        } else {
            let a_next = self.act(&t.next_state, weight, rng)?;
            Some(self.embed(&t.next_state, &a_next)?)
        };
        self.store
            .push(phi.view(), t.reward, t.next_state.values.clone(), t.continuation())?;
        self.posterior.absorb_step(
            phi.view(),
            t.reward,
            r_e,
            next_phi.as_ref().map(|p| p.view()),
            self.config.gamma,
        )?;
        Ok(StepInfo {
            exploration_reward: Some(r_e),
            variance: Some(variance),
            variance_bound: Some(self.vmax()),
        })
    }

    fn end_episode(&mut self, weight: f64, rng: &mut RunRng) -> Result<EpisodeReport> {
        self.sweep(weight, rng)
    }

    fn default_weight(&self) -> f64 {
        self.kappa()
    }
}
