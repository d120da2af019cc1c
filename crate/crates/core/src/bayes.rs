//! Bayesian linear regression for the two value channels.
//!
//! Both channels share one posterior covariance `S = (αI + βΦᵀΦ)⁻¹`, kept up
//! to date with Sherman-Morrison rank-1 updates. Each channel has its own
//! running target `t` and weight mean `m = S t`.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, Result};

const SYMMETRIZE_EVERY: u64 = 1000;

/// Which predictive variance a caller wants.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceForm {
    /// `β⁻¹ φᵀSφ`
    #[default]
    Epistemic,
    /// `β⁻¹ + φᵀSφ`
    WithNoise,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosteriorState {
    s: Array2<f64>,
    m_q: Array1<f64>,
    m_u: Array1<f64>,
    t_q: Array1<f64>,
    t_u: Array1<f64>,
    alpha: f64,
    beta: f64,
    updates: u64,
}

pub fn predict_mean(phi: ArrayView1<f64>, m: ArrayView1<f64>) -> Result<f64> {
    check_dim(m.len(), phi.len())?;
    Ok(phi.dot(&m))
}

impl PosteriorState {
    pub fn new(alpha: f64, beta: f64, n_features: usize) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(invalid("alpha", "must be positive and finite"));
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(invalid("beta", "must be positive and finite"));
        }
        if n_features == 0 {
            return Err(invalid("n_features", "must be at least 1"));
        }
        let zeros = Array1::zeros(n_features);
        Ok(PosteriorState {
            s: Array2::eye(n_features) / alpha,
            m_q: zeros.clone(),
            m_u: zeros.clone(),
            t_q: zeros.clone(),
            t_u: zeros,
            alpha,
            beta,
            updates: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.m_q.len()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn covariance(&self) -> &Array2<f64> {
        &self.s
    }

    pub fn mean_q(&self) -> &Array1<f64> {
        &self.m_q
    }

    pub fn mean_u(&self) -> &Array1<f64> {
        &self.m_u
    }

    pub fn target_q(&self) -> &Array1<f64> {
        &self.t_q
    }

    pub fn target_u(&self) -> &Array1<f64> {
        &self.t_u
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    /// Supremum of the predictive variance over unit-norm features.
    pub fn vmax(&self, form: VarianceForm) -> f64 {
        vmax(self.alpha, self.beta, form)
    }

    /// `S ← S − β (Sφ)(φᵀS) / (1 + β φᵀSφ)`
    pub fn rank1_update(&mut self, phi: ArrayView1<f64>) -> Result<()> {
        check_dim(self.dim(), phi.len())?;
        let sphi = self.s.dot(&phi);
        let denom = 1.0 + self.beta * phi.dot(&sphi);
        let scale = self.beta / denom;
        let m = self.dim();
        for i in 0..m {
            let a = scale * sphi[i];
            if a == 0.0 {
                continue;
            }
            let mut row = self.s.row_mut(i);
            row.scaled_add(-a, &sphi);
        }
        self.updates += 1;
        if self.updates % SYMMETRIZE_EVERY == 0 {
            self.symmetrize();
        }
        Ok(())
    }

    fn symmetrize(&mut self) {
        let m = self.dim();
        for i in 0..m {
            for j in i + 1..m {
                let avg = 0.5 * (self.s[[i, j]] + self.s[[j, i]]);
                self.s[[i, j]] = avg;
                self.s[[j, i]] = avg;
            }
        }
    }

    /// `φᵀSφ`
    pub fn quadratic(&self, phi: ArrayView1<f64>) -> Result<f64> {
        check_dim(self.dim(), phi.len())?;
        Ok(phi.dot(&self.s.dot(&phi)))
    }

    pub fn predict_var(&self, phi: ArrayView1<f64>, form: VarianceForm) -> Result<f64> {
        let q = self.quadratic(phi)?;
        Ok(variance_from_quadratic(q, self.beta, form))
    }

    pub fn predict_q(&self, phi: ArrayView1<f64>) -> Result<f64> {
        predict_mean(phi, self.m_q.view())
    }

    pub fn predict_u(&self, phi: ArrayView1<f64>) -> Result<f64> {
        predict_mean(phi, self.m_u.view())
    }

    /// Absorb one transition into both channels.
    ///
    /// `next_phi` carries the next-state features under the current policy;
    /// pass `None` for absorbing transitions so the bootstrap is zero.
    pub fn absorb_step(
        &mut self,
        phi: ArrayView1<f64>,
        reward: f64,
        exploration_reward: f64,
        next_phi: Option<ArrayView1<f64>>,
        gamma: f64,
    ) -> Result<()> {
        check_dim(self.dim(), phi.len())?;
        let (boot_q, boot_u) = match next_phi {
            Some(next) => {
                check_dim(self.dim(), next.len())?;
                (next.dot(&self.m_q), next.dot(&self.m_u))
            }
            None => (0.0, 0.0),
        };
        self.rank1_update(phi)?;
        let yq = reward + gamma * boot_q;
        let yu = exploration_reward + gamma * boot_u;
        self.t_q.scaled_add(self.beta * yq, &phi);
        self.t_u.scaled_add(self.beta * yu, &phi);
        self.recompute_means();
        Ok(())
    }

    #[cfg(test)]
    pub(crate) fn m_q_for_tests(&mut self, m: Array1<f64>) {
        self.m_q = m;
    }

    fn recompute_means(&mut self) {
        self.m_q = self.s.dot(&self.t_q);
        self.m_u = self.s.dot(&self.t_u);
    }
}

pub fn vmax(alpha: f64, beta: f64, form: VarianceForm) -> f64 {
    variance_from_quadratic(1.0 / alpha, beta, form)
}

pub fn variance_from_quadratic(quadratic: f64, beta: f64, form: VarianceForm) -> f64 {
    match form {
        VarianceForm::Epistemic => quadratic / beta,
        VarianceForm::WithNoise => 1.0 / beta + quadratic,
    }
}

/// Append-only record of the transitions absorbed during a run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TransitionStore {
    n_features: usize,
    phi: Vec<f64>,
    rewards: Vec<f64>,
    next_states: Vec<Vec<f64>>,
    continuation: Vec<f64>,
}

impl TransitionStore {
    pub fn new(n_features: usize) -> Self {
        TransitionStore {
            n_features,
            ..Default::default()
        }
    }

    pub fn push(
        &mut self,
        phi: ArrayView1<f64>,
        reward: f64,
        next_state: Vec<f64>,
        continuation: f64,
    ) -> Result<()> {
        check_dim(self.n_features, phi.len())?;
        self.phi.extend(phi.iter());
        self.rewards.push(reward);
        self.next_states.push(next_state);
        self.continuation.push(continuation);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    /// Stored features, one row per transition.
    pub fn features(&self) -> ArrayView2<'_, f64> {
        ArrayView2::from_shape((self.len(), self.n_features), &self.phi)
            .expect("store rows are always n_features long")
    }

    pub fn rewards(&self) -> ArrayView1<'_, f64> {
        ArrayView1::from(&self.rewards)
    }

    pub fn next_states(&self) -> &[Vec<f64>] {
        &self.next_states
    }

    pub fn continuation(&self) -> ArrayView1<'_, f64> {
        ArrayView1::from(&self.continuation)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSettings {
    pub gamma: f64,
    pub tolerance: f64,
    pub max_iters: usize,
}

impl Default for SweepSettings {
    fn default() -> Self {
        SweepSettings {
            gamma: 0.99,
            tolerance: 1e-6,
            max_iters: 200,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ChannelSweep {
    pub iterations: usize,
    pub converged: bool,
    /// `‖m − F(m)‖∞` at the last iterate.
    pub residual: f64,
    /// The iteration diverged and the previous mean was kept.
    pub rejected: bool,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub q: ChannelSweep,
    pub u: ChannelSweep,
}

impl SweepReport {
    pub fn converged(&self) -> bool {
        self.q.converged && self.u.converged
    }
}

/// Fixed-point refit of both weight means on every stored transition.
///
/// Iterates `m ← βSΦᵀ(r + γ c∘(Φ'm))` for Q with the environment rewards and
/// then for U with `exploration_rewards`. `next_phi` holds the next-state
/// features under the current policy and `c` the continuation flags. The
/// running targets are rebuilt from the result so later per-step updates stay
/// consistent with `m = S t`.
pub fn episode_sweep(
    post: &mut PosteriorState,
    phi: ArrayView2<f64>,
    rewards: ArrayView1<f64>,
    exploration_rewards: ArrayView1<f64>,
    next_phi: ArrayView2<f64>,
    continuation: ArrayView1<f64>,
    settings: SweepSettings,
) -> Result<SweepReport> {
    let m = post.dim();
    let n = phi.nrows();
    check_dim(m, phi.ncols())?;
    check_dim(m, next_phi.ncols())?;
    check_dim(n, next_phi.nrows())?;
    check_dim(n, rewards.len())?;
    check_dim(n, exploration_rewards.len())?;
    check_dim(n, continuation.len())?;
    if n == 0 {
        return Ok(SweepReport::default());
    }
    let beta = post.beta;
    let gamma = settings.gamma;
    // G = Φᵀ diag(c) Φ'
    let mut masked_next = next_phi.to_owned();
    for (mut row, &c) in masked_next.axis_iter_mut(Axis(0)).zip(continuation.iter()) {
        if c != 1.0 {
            row *= c;
        }
    }
    let g = phi.t().dot(&masked_next);
    let contraction = post.s.dot(&g) * (beta * gamma);
    let b_q = post.s.dot(&phi.t().dot(&rewards)) * beta;
    let b_u = post.s.dot(&phi.t().dot(&exploration_rewards)) * beta;

    let (m_q, q) = fixed_point(&contraction, &b_q, post.m_q.clone(), settings);
    let (m_u, u) = fixed_point(&contraction, &b_u, post.m_u.clone(), settings);

    // t = βΦᵀ(r + γ c∘Φ'm)
    if let Some(m_q) = m_q {
        post.t_q = (phi.t().dot(&rewards) + g.dot(&m_q) * gamma) * beta;
        post.m_q = m_q;
    }
    if let Some(m_u) = m_u {
        post.t_u = (phi.t().dot(&exploration_rewards) + g.dot(&m_u) * gamma) * beta;
        post.m_u = m_u;
    }
    Ok(SweepReport { q, u })
}

/// Iterate `m ← b + K m` from `start`.
///
/// Returns `None` when the iteration is not contracting (the residual blew up
/// or ended above where it started), in which case the caller keeps its current mean.
fn fixed_point(
    k: &Array2<f64>,
    b: &Array1<f64>,
    start: Array1<f64>,
    settings: SweepSettings,
) -> (Option<Array1<f64>>, ChannelSweep) {
    let mut m = start;
    let mut iterations = 0;
    let mut first_residual = None;
    loop {
        let next = b + &k.dot(&m);
        let residual = next
            .iter()
            .zip(m.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let first = *first_residual.get_or_insert(residual);
        let report = |converged| ChannelSweep {
            iterations,
            converged,
            residual,
            rejected: false,
        };
        if residual < settings.tolerance {
            return (Some(m), report(true));
        }
        let blown_up = !residual.is_finite() || residual > 1e3 * first;
        if blown_up || (iterations >= settings.max_iters && residual > first) {
            return (None, ChannelSweep { rejected: true, ..report(false) });
        }
        if iterations >= settings.max_iters {
            return (Some(next), report(false));
        }
        m = next;
        iterations += 1;
    }
}
