use ndarray::{s, Array1, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use super::rff::{features_from_phases, RffMap, SamplingScheme};
use crate::error::{check_dim, invalid, Error, Result};
use crate::mdp::{Action, ActionKind};

/// How an action is turned into kernel inputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ActionEncoding {
    /// Box actions are rescaled onto [0, 1] per dimension.
    Box { low: Vec<f64>, high: Vec<f64> },
    /// Discrete actions are one-hot vectors.
    OneHot(usize),
}

impl ActionEncoding {
    pub fn for_kind(kind: &ActionKind) -> Self {
        match kind {
            ActionKind::Discrete(n) => ActionEncoding::OneHot(*n),
            ActionKind::Box { low, high } => ActionEncoding::Box {
                low: low.clone(),
                high: high.clone(),
            },
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ActionEncoding::Box { low, .. } => low.len(),
            ActionEncoding::OneHot(n) => *n,
        }
    }

    pub fn encode(&self, action: &Action) -> Result<Vec<f64>> {
        match (self, action) {
            (ActionEncoding::Box { low, high }, Action::Continuous(a)) => {
                check_dim(low.len(), a.len())?;
                Ok(a.iter()
                    .zip(low.iter().zip(high))
                    .map(|(&x, (&lo, &hi))| (x - lo) / (hi - lo))
                    .collect())
            }
            (ActionEncoding::OneHot(n), Action::Discrete(i)) => {
                if i >= n {
                    return Err(Error::InvalidAction(format!("index {i} outside 0..{n}")));
                }
                let mut v = vec![0.0; *n];
                v[*i] = 1.0;
                Ok(v)
            }
            _ => Err(Error::InvalidAction("action does not match the feature encoding".into())),
        }
    }
}

/// Cosines and sines of a phase vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Phases {
    pub cos: Array1<f64>,
    pub sin: Array1<f64>,
}

impl Phases {
    pub fn of(angles: ArrayView1<f64>) -> Self {
        let mut cos = Array1::zeros(angles.len());
        let mut sin = Array1::zeros(angles.len());
        for (k, &p) in angles.iter().enumerate() {
            let (sv, cv) = p.sin_cos();
            cos[k] = cv;
            sin[k] = sv;
        }
        Phases { cos, sin }
    }
}

/// RFF over concatenated (state, encoded action) inputs with separate state
/// and action lengthscales.
///
/// Since the phase of `(s, a)` is `sᵀΩ_s + aᵀΩ_a`, callers evaluating many
/// actions at one state can precompute both halves and combine them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointRff {
    map: RffMap,
    state_dim: usize,
    encoding: ActionEncoding,
}

impl JointRff {
    pub fn new(
        state_dim: usize,
        encoding: ActionEncoding,
        state_lengthscale: f64,
        action_lengthscale: f64,
        n_features: usize,
        scheme: SamplingScheme,
        seed: u64,
    ) -> Result<Self> {
        if state_dim == 0 {
            return Err(invalid("state_dim", "must be at least 1"));
        }
        let mut lengthscales = vec![state_lengthscale; state_dim];
        lengthscales.extend(std::iter::repeat_n(action_lengthscale, encoding.dim()));
        let map = RffMap::with_features(&lengthscales, n_features, scheme, seed)?;
        Ok(JointRff {
            map,
            state_dim,
            encoding,
        })
    }

    pub fn map(&self) -> &RffMap {
        &self.map
    }

    pub fn encoding(&self) -> &ActionEncoding {
        &self.encoding
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn input_dim(&self) -> usize {
        self.map.input_dim()
    }

    pub fn n_spectral(&self) -> usize {
        self.map.n_spectral()
    }

    pub fn n_features(&self) -> usize {
        self.map.n_features()
    }

    /// Rows of Ω belonging to the state inputs.
    pub fn state_frequencies(&self) -> ArrayView2<'_, f64> {
        self.map.frequencies().slice(s![..self.state_dim, ..])
    }

    /// Rows of Ω belonging to the encoded action inputs.
    pub fn action_frequencies(&self) -> ArrayView2<'_, f64> {
        self.map.frequencies().slice(s![self.state_dim.., ..])
    }

    pub fn state_phases(&self, state: &[f64]) -> Result<Array1<f64>> {
        check_dim(self.state_dim, state.len())?;
        Ok(ArrayView1::from(state).dot(&self.state_frequencies()))
    }

    pub fn action_phases(&self, action: &Action) -> Result<Array1<f64>> {
        let enc = self.encoding.encode(action)?;
        Ok(ArrayView1::from(&enc[..]).dot(&self.action_frequencies()))
    }

    pub fn embed(&self, state: &[f64], action: &Action) -> Result<Array1<f64>> {
        let phases = self.state_phases(state)? + self.action_phases(action)?;
        Ok(features_from_phases(phases.view()))
    }

    /// Features from precomputed state and action phases.
    pub fn combine(&self, state_phases: &Array1<f64>, action_phases: &Array1<f64>) -> Array1<f64> {
        features_from_phases((state_phases + action_phases).view())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mountain_car_map() -> JointRff {
        let enc = ActionEncoding::Box {
            low: vec![-1.0],
            high: vec![1.0],
        };
        JointRff::new(2, enc, 0.3, 10.0, 300, SamplingScheme::QuasiRandom, 5).unwrap()
    }

    #[test]
    fn joint_input_dims_and_lengthscales() {
        let map = mountain_car_map();
        assert_eq!(map.input_dim(), 3);
        assert_eq!(map.map().lengthscales(), &[0.3, 0.3, 10.0]);
        assert_eq!(map.n_features(), 300);
    }

    #[test]
    fn joint_embedding_matches_plain_map_on_concatenated_input() {
        let map = mountain_car_map();
        let phi = map.embed(&[0.2, 0.7], &Action::Continuous(vec![0.5])).unwrap();
        // 0.5 in [-1, 1] encodes to 0.75
        let direct = map.map().embed(&[0.2, 0.7, 0.75]).unwrap();
        for (a, b) in phi.iter().zip(direct.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((phi.dot(&phi) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn one_hot_encoding() {
        let enc = ActionEncoding::OneHot(3);
        assert_eq!(enc.encode(&Action::Discrete(1)).unwrap(), vec![0.0, 1.0, 0.0]);
        assert!(enc.encode(&Action::Discrete(3)).is_err());
        assert!(enc.encode(&Action::Continuous(vec![0.0])).is_err());
        let map = JointRff::new(1, enc, 0.1, 0.1, 20, SamplingScheme::MonteCarlo, 0).unwrap();
        assert_eq!(map.input_dim(), 4);
        assert!(map.embed(&[0.0, 0.0], &Action::Discrete(0)).is_err());
    }

    #[test]
    fn phases_match_sin_cos() {
        let p = Phases::of(ArrayView1::from(&[0.0, std::f64::consts::FRAC_PI_2][..]));
        assert_eq!(p.cos[0], 1.0);
        assert_eq!(p.sin[1], 1.0);
    }
}
