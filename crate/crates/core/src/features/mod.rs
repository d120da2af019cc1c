//! Feature embeddings for linear value models.

mod fourier_basis;
mod halton;
mod joint;
mod rff;

pub use fourier_basis::FourierBasisMap;
pub use halton::{halton_point, primes, radical_inverse};
pub use joint::{ActionEncoding, JointRff, Phases};
pub use rff::{RffMap, SamplingScheme};

use crate::error::{check_dim, Result};

/// Exact anisotropic RBF kernel `exp(-½ Σ ((x_i - y_i) / l_i)²)`.
pub fn rbf_kernel(x: &[f64], y: &[f64], lengthscales: &[f64]) -> Result<f64> {
    check_dim(x.len(), y.len())?;
    check_dim(x.len(), lengthscales.len())?;
    let q: f64 = x
        .iter()
        .zip(y)
        .zip(lengthscales)
        .map(|((a, b), l)| ((a - b) / l).powi(2))
        .sum();
    Ok((-0.5 * q).exp())
}
