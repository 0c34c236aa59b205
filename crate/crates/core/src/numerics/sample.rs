use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Observations `X_1..X_n` together with the known noise standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    values: Vec<f64>,
    sigma: f64,
}

impl Sample {
    /// Builds a sample. `sigma = 0` is accepted and means noise-free data.
    pub fn new(values: Vec<f64>, sigma: f64) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("values", "sample must contain at least one observation"));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid("values", format!("non-finite observation {bad}")));
        }
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(Error::invalid("sigma", format!("must be finite and non-negative, got {sigma}")));
        }
        Ok(Sample { values, sigma })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Concatenates two samples sharing the same noise level.
    pub fn concat(&self, other: &Sample) -> Result<Sample> {
        if self.sigma != other.sigma {
            return Err(Error::invalid("sigma", "cannot pool samples with different noise levels"));
        }
        let mut values = self.values.clone();
        values.extend_from_slice(&other.values);
        Sample::new(values, self.sigma)
    }

    /// `(1/n) sum_j cos(t (X_j - shift))`, the real part of the empirical
    /// characteristic function of the shifted sample.
    pub(crate) fn mean_cos(&self, t: f64, shift: f64) -> f64 {
        let sum: f64 = self.values.iter().map(|&x| (t * (x - shift)).cos()).sum();
        sum / self.values.len() as f64
    }
}

/// Empirical characteristic function `(1/n) sum_j exp(i t X_j)`.
pub fn empirical_cf(sample: &Sample, t: f64) -> Complex64 {
    let (re, im) = sample.values().iter().fold((0.0, 0.0), |(re, im), &x| {
        let (s, c) = (t * x).sin_cos();
        (re + c, im + s)
    });
    let n = sample.len() as f64;
    Complex64::new(re / n, im / n)
}
