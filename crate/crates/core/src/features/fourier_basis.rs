use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, Result};

/// Order-`n` Fourier basis `cos(π sᵀC)` with `C = {0..n}^d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourierBasisMap {
    order: usize,
    /// Shape (d, (n+1)^d).
    coefficients: Array2<f64>,
}

impl FourierBasisMap {
    pub fn new(input_dim: usize, order: usize) -> Result<Self> {
        if input_dim == 0 {
            return Err(invalid("input_dim", "must be at least 1"));
        }
        let n_features = (order + 1)
            .checked_pow(input_dim as u32)
            .ok_or_else(|| invalid("order", "feature count overflows"))?;
        let mut coefficients = Array2::zeros((input_dim, n_features));
        for col in 0..n_features {
            let mut rest = col;
            for k in 0..input_dim {
                coefficients[[k, col]] = (rest % (order + 1)) as f64;
                rest /= order + 1;
            }
        }
        Ok(FourierBasisMap {
            order,
            coefficients,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn input_dim(&self) -> usize {
        self.coefficients.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.coefficients.ncols()
    }

    pub fn coefficients(&self) -> &Array2<f64> {
        &self.coefficients
    }

    pub fn embed(&self, s: &[f64]) -> Result<Array1<f64>> {
        check_dim(self.input_dim(), s.len())?;
        Ok(ArrayView1::from(s)
            .dot(&self.coefficients)
            .mapv(|x| (std::f64::consts::PI * x).cos()))
    }
}
