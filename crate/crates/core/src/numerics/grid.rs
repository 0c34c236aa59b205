//! FFT evaluation of Fourier-inversion estimators on a regular grid.
//!
//! For a half-line inversion integral
//! `(1/2pi) int_0^inf exp(-i t x) psi(t) dt` sampled at frequencies
//! `v_j = eta (j - 1)` and locations `x_u = -N delta / 2 + delta (u - 1)`,
//! the choice `delta eta = 2 pi / N` turns the Simpson-weighted sum into a
//! length-`N` DFT. The mirrored half-line integral uses the inverse
//! transform, and the two are added.

use std::f64::consts::PI;
use std::io::{self, Write};

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::sample::{empirical_cf, Sample};
use crate::check_damping;
use crate::error::{Error, Result};

/// Default number of grid points.
pub const DEFAULT_POINTS: usize = 1 << 16;
/// Default `N eta h`: how many kernel supports the frequency grid spans.
pub const DEFAULT_COVERAGE: f64 = 64.0;

/// Regular frequency/space grid pair with `delta * eta = 2 pi / N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    n_points: usize,
    eta: f64,
    delta: f64,
}

impl GridConfig {
    pub fn new(n_points: usize, eta: f64) -> Result<Self> {
        if n_points < 2 || !n_points.is_power_of_two() {
            return Err(Error::invalid("n_points", format!("must be a power of two >= 2, got {n_points}")));
        }
        if !(eta > 0.0) || !eta.is_finite() {
            return Err(Error::invalid("eta", format!("must be positive and finite, got {eta}")));
        }
        let delta = 2.0 * PI / (n_points as f64 * eta);
        Ok(GridConfig { n_points, eta, delta })
    }

    /// `N` points with frequency step `eta = coverage / (h N)`.
    pub fn for_bandwidth(h: f64, n_points: usize, coverage: f64) -> Result<Self> {
        if !(h > 0.0) {
            return Err(Error::invalid("h", format!("must be positive, got {h}")));
        }
        if !(coverage >= 1.0) {
            return Err(Error::invalid("coverage", format!("must be at least 1, got {coverage}")));
        }
        Self::new(n_points, coverage / (h * n_points as f64))
    }

    /// Default grid for bandwidth `h`: `N = 2^16`, coverage 64.
    pub fn default_for(h: f64) -> Result<Self> {
        Self::for_bandwidth(h, DEFAULT_POINTS, DEFAULT_COVERAGE)
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Location of the zero-based grid index `u`.
    pub fn x(&self, u: usize) -> f64 {
        -(self.n_points as f64) * self.delta / 2.0 + self.delta * u as f64
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.n_points).map(|u| self.x(u)).collect()
    }

    /// Index of the grid point nearest to `x`, if `x` lies on the grid span.
    pub fn nearest_index(&self, x: f64) -> Option<usize> {
        let pos = ((x - self.x(0)) / self.delta).round();
        (pos >= 0.0 && pos < self.n_points as f64).then_some(pos as usize)
    }

    /// Largest frequency reached, `N eta`.
    pub fn frequency_span(&self) -> f64 {
        self.n_points as f64 * self.eta
    }
}

/// Which estimator produced a [`DensityGrid`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorTag {
    /// Classical deconvolution estimator, no atom correction.
    Classical,
    /// Atom-corrected estimator with known `p`.
    KnownP,
    /// Atom-corrected estimator with estimated `p`.
    PlugIn,
    /// The rescaled kernel `w_h` itself.
    KernelShape,
    /// Output of a bare [`fft_grid_eval`] call.
    Raw,
}

/// Estimate values on a regular grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityGrid {
    pub xs: Vec<f64>,
    pub values: Vec<f64>,
    pub config: GridConfig,
    pub estimator_tag: EstimatorTag,
}

impl DensityGrid {
    /// Linear interpolation between the two nearest grid points.
    pub fn interpolate(&self, x: f64) -> Option<f64> {
        let c = &self.config;
        let pos = (x - c.x(0)) / c.delta();
        if !(pos >= 0.0) || pos > (c.n_points() - 1) as f64 {
            return None;
        }
        let lo = (pos.floor() as usize).min(c.n_points() - 2);
        let frac = pos - lo as f64;
        Some(self.values[lo] * (1.0 - frac) + self.values[lo + 1] * frac)
    }

    /// Restrict to grid points with `lo <= x <= hi`.
    pub fn window(&self, lo: f64, hi: f64) -> Vec<(f64, f64)> {
        self.xs
            .iter()
            .zip(&self.values)
            .filter(|(x, _)| **x >= lo && **x <= hi)
            .map(|(x, v)| (*x, *v))
            .collect()
    }

    /// Zeroes negative values and rescales so the grid integrates to one.
    pub fn clip_and_renormalize(&mut self) {
        for v in &mut self.values {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        let mass: f64 = self.values.iter().sum::<f64>() * self.config.delta();
        if mass > 0.0 {
            for v in &mut self.values {
                *v /= mass;
            }
        }
    }

    /// Riemann-sum integral over the grid.
    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.config.delta()
    }

    /// Writes `x,value` rows with a header line.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "x,value")?;
        for (x, v) in self.xs.iter().zip(&self.values) {
            writeln!(out, "{x},{v}")?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("grid serializes")
    }
}

/// Simpson weight `(eta/3)(3 + (-1)^j - [j == 1])` for the one-based index `j`.
pub fn simpson_weight(j: usize, eta: f64) -> f64 {
    let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
    let kronecker = if j == 1 { 1.0 } else { 0.0 };
    eta / 3.0 * (3.0 + sign - kronecker)
}

/// FFT evaluation of the deconvolution estimator
/// `(1/2pi) int exp(-i t x) phi_emp(t) ft_weight(h t) exp(sigma^2 t^2 / 2) dt`
/// on the grid described by `config`.
pub fn fft_grid_eval<W>(sample: &Sample, ft_weight: W, h: f64, config: &GridConfig) -> Result<DensityGrid>
where
    W: Fn(f64) -> f64 + Sync,
{
    fourier_grid(|t| empirical_cf(sample, t), ft_weight, h, sample.sigma(), config, EstimatorTag::Raw)
}

/// General grid inversion of `cf(t) ft_weight(h t) exp(sigma^2 t^2 / 2)`.
///
/// `cf` must be Hermitian (`cf(-t) = conj(cf(t))`); the mirrored half-line
/// uses `conj(cf(t))`.
pub(crate) fn fourier_grid<C, W>(
    cf: C,
    ft_weight: W,
    h: f64,
    sigma: f64,
    config: &GridConfig,
    tag: EstimatorTag,
) -> Result<DensityGrid>
where
    C: Fn(f64) -> Complex64 + Sync,
    W: Fn(f64) -> f64 + Sync,
{
    if !(h > 0.0) {
        return Err(Error::invalid("h", format!("must be positive, got {h}")));
    }
    check_damping(sigma, h)?;
    let required = 1.0 / h;
    if config.frequency_span() < required {
        return Err(Error::Coverage { covered: config.frequency_span(), required });
    }

    let n = config.n_points();
    let eta = config.eta();
    let half_var = 0.5 * sigma * sigma;

    // psi(v_j) times the Simpson weight, zero beyond the kernel support.
    // The shift factor exp(i v_j N delta / 2) equals (-1)^(j-1) exactly.
    let support_len = ((required / eta).floor() as usize + 1).min(n);
    let weighted: Vec<Complex64> = (0..support_len)
        .into_par_iter()
        .map(|k| {
            let v = eta * k as f64;
            let phi = ft_weight(h * v);
            if phi == 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            let shift = if k % 2 == 0 { 1.0 } else { -1.0 };
            cf(v) * (phi * (half_var * v * v).exp() * simpson_weight(k + 1, eta) * shift)
        })
        .collect();

    let mut forward = vec![Complex64::new(0.0, 0.0); n];
    forward[..support_len].copy_from_slice(&weighted);
    let mut backward: Vec<Complex64> = forward.iter().map(|z| z.conj()).collect();

    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    rayon::join(|| fwd.process(&mut forward), || inv.process(&mut backward));

    let scale = 1.0 / (2.0 * PI);
    let combined: Vec<Complex64> = forward.iter().zip(&backward).map(|(a, b)| (a + b) * scale).collect();
    let max_real = combined.iter().map(|z| z.re.abs()).fold(0.0, f64::max);
    let max_imag = combined.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    if max_imag > 1e-8 * max_real {
        return Err(Error::NonRealResult { max_imag, max_real });
    }

    Ok(DensityGrid {
        xs: config.xs(),
        values: combined.into_iter().map(|z| z.re).collect(),
        config: *config,
        estimator_tag: tag,
    })
}
