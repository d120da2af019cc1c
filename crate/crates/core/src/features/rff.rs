use ndarray::{Array1, Array2, ArrayView1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::halton::{primes, radical_inverse};
use crate::error::{check_dim, invalid, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingScheme {
    MonteCarlo,
    /// Randomly shifted Halton points pushed through the inverse normal CDF.
    QuasiRandom,
}

/// Random Fourier feature map for an anisotropic RBF kernel.
///
/// Features are `(1/√J) [cos(xᵀω_1) .. cos(xᵀω_J), sin(xᵀω_1) .. sin(xᵀω_J)]`
/// with `J` spectral samples, so every feature vector has unit norm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RffMap {
    /// Shape (input dim, J): one column per spectral sample.
    frequencies: Array2<f64>,
    lengthscales: Vec<f64>,
    scheme: SamplingScheme,
    seed: u64,
}

impl RffMap {
    /// Draw `n_spectral` frequencies from the kernel's spectral density
    /// `N(0, diag(1/l²))`.
    pub fn sample(
        lengthscales: &[f64],
        n_spectral: usize,
        scheme: SamplingScheme,
        seed: u64,
    ) -> Result<Self> {
        if lengthscales.is_empty() {
            return Err(invalid("lengthscales", "need at least one input dimension"));
        }
        if lengthscales.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return Err(invalid("lengthscales", "must be positive and finite"));
        }
        if n_spectral == 0 {
            return Err(invalid("n_spectral", "must be at least 1"));
        }
        let d = lengthscales.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut frequencies = Array2::zeros((d, n_spectral));
        match scheme {
            SamplingScheme::MonteCarlo => {
                for j in 0..n_spectral {
                    for (k, l) in lengthscales.iter().enumerate() {
                        let z: f64 = rng.sample(StandardNormal);
                        frequencies[[k, j]] = z / l;
                    }
                }
            }
            SamplingScheme::QuasiRandom => {
                let std_normal = Normal::standard();
                let bases = primes(d);
                let shifts: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
                for j in 0..n_spectral {
                    for k in 0..d {
                        let u = (radical_inverse(j as u64 + 1, bases[k]) + shifts[k]).fract();
                        let u = u.clamp(1e-12, 1.0 - 1e-12);
                        frequencies[[k, j]] = std_normal.inverse_cdf(u) / lengthscales[k];
                    }
                }
            }
        }
        Ok(RffMap {
            frequencies,
            lengthscales: lengthscales.to_vec(),
            scheme,
            seed,
        })
    }

    /// Same as [`RffMap::sample`] but sized by output length `M = 2J`.
    pub fn with_features(
        lengthscales: &[f64],
        n_features: usize,
        scheme: SamplingScheme,
        seed: u64,
    ) -> Result<Self> {
        if n_features == 0 || n_features % 2 != 0 {
            return Err(invalid("n_features", "must be a positive even number"));
        }
        Self::sample(lengthscales, n_features / 2, scheme, seed)
    }

    /// Build from explicit frequencies (shape: input dim × J).
    pub fn from_frequencies(frequencies: Array2<f64>, lengthscales: Vec<f64>) -> Result<Self> {
        check_dim(frequencies.nrows(), lengthscales.len())?;
        if frequencies.ncols() == 0 {
            return Err(invalid("frequencies", "need at least one spectral sample"));
        }
        Ok(RffMap {
            frequencies,
            lengthscales,
            scheme: SamplingScheme::MonteCarlo,
            seed: 0,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.frequencies.nrows()
    }

    pub fn n_spectral(&self) -> usize {
        self.frequencies.ncols()
    }

    pub fn n_features(&self) -> usize {
        2 * self.n_spectral()
    }

    pub fn frequencies(&self) -> &Array2<f64> {
        &self.frequencies
    }

    pub fn lengthscales(&self) -> &[f64] {
        &self.lengthscales
    }

    pub fn scheme(&self) -> SamplingScheme {
        self.scheme
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// `xᵀΩ`, one phase per spectral sample.
    pub fn phases(&self, x: &[f64]) -> Result<Array1<f64>> {
        check_dim(self.input_dim(), x.len())?;
        Ok(ArrayView1::from(x).dot(&self.frequencies))
    }

    pub fn embed(&self, x: &[f64]) -> Result<Array1<f64>> {
        let phases = self.phases(x)?;
        Ok(features_from_phases(phases.view()))
    }
}

pub(crate) fn features_from_phases(phases: ArrayView1<f64>) -> Array1<f64> {
    let j = phases.len();
    let scale = 1.0 / (j as f64).sqrt();
    let mut out = Array1::zeros(2 * j);
    for (k, &p) in phases.iter().enumerate() {
        let (s, c) = p.sin_cos();
        out[k] = c * scale;
        out[j + k] = s * scale;
    }
    out
}
