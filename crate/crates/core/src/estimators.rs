//! Estimators of the atom mass `p` and the density `f`.
//!
//! All density estimators are built from the classical deconvolution
//! estimator
//!
//! ```text
//! fhat(x) = (1/(pi n h)) sum_j int_0^1 cos(s (X_j - x) / h) phi_w(s) exp(sigma^2 s^2 / (2 h^2)) ds
//! ```
//!
//! and the rescaled kernel `w_h(x) = w(x/h) / h`, combined as
//! `f(x) = fhat(x) / (1 - p) - p / (1 - p) * w_h(x)`. The atom estimator is
//! the same integral at `x = 0` with the atom kernel, rescaled by `g pi`.
//!
//! Every estimator has a pointwise quadrature path and, for densities, an
//! FFT grid path. The two are independent and serve as oracles for each
//! other.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::check_damping;
use crate::error::{Error, Result};
use crate::kernels::{Kernel, KernelKind};
use crate::numerics::{
    empirical_cf, fourier_grid, integrate_panels, DensityGrid, EstimatorTag, GridConfig, Sample,
};

// Relative accuracy requested from the estimator quadratures.
const REL_TOL: f64 = 1e-12;

/// Bandwidths, truncation level, kernels and grid for the plug-in estimator.
#[derive(Debug, Clone)]
pub struct EstimatorConfig {
    pub h: f64,
    pub g: f64,
    pub eps_n: f64,
    pub kernel_w: Kernel,
    pub kernel_k: Kernel,
    pub grid: GridConfig,
}

impl EstimatorConfig {
    /// Validated config with the default grid for `h`.
    pub fn new(h: f64, g: f64, eps_n: f64, kernel_w: Kernel, kernel_k: Kernel) -> Result<Self> {
        let grid = GridConfig::default_for(h)?;
        Self::with_grid(h, g, eps_n, kernel_w, kernel_k, grid)
    }

    pub fn with_grid(h: f64, g: f64, eps_n: f64, kernel_w: Kernel, kernel_k: Kernel, grid: GridConfig) -> Result<Self> {
        check_bandwidth("h", h)?;
        check_bandwidth("g", g)?;
        if !(eps_n > 0.0 && eps_n < 1.0) {
            return Err(Error::invalid("eps_n", format!("must lie in (0, 1), got {eps_n}")));
        }
        if kernel_k.kind() != KernelKind::Atom || (kernel_k.ft_integral() - 2.0).abs() > 1e-8 {
            return Err(Error::invalid("kernel_k", format!("`{}` is not an atom kernel", kernel_k.name())));
        }
        if kernel_w.kind() != KernelKind::Density {
            return Err(Error::invalid("kernel_w", format!("`{}` is not a density kernel", kernel_w.name())));
        }
        Ok(EstimatorConfig { h, g, eps_n, kernel_w, kernel_k, grid })
    }
}

/// Raw and truncated estimates of the atom mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PEstimate {
    pub p_raw: f64,
    pub p_hat: f64,
    pub g_used: f64,
    pub eps_used: f64,
    pub truncated: bool,
}

impl PEstimate {
    /// Truncates from above at `1 - eps`; negative values pass through.
    pub fn from_raw(p_raw: f64, g: f64, eps_n: f64) -> Self {
        let cap = 1.0 - eps_n;
        let truncated = p_raw > cap;
        PEstimate { p_raw, p_hat: if truncated { cap } else { p_raw }, g_used: g, eps_used: eps_n, truncated }
    }
}

fn check_bandwidth(field: &'static str, h: f64) -> Result<()> {
    if h > 0.0 && h.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(field, format!("bandwidth must be positive and finite, got {h}")))
    }
}

/// `int_0^1 [(1/n) sum_j cos(s (X_j - x) / h)] phi(s) exp(sigma^2 s^2 / (2 h^2)) ds`.
fn damped_cosine_integral(sample: &Sample, x: f64, h: f64, kernel: &Kernel) -> Result<f64> {
    check_bandwidth("h", h)?;
    let exponent = check_damping(sample.sigma(), h)?;
    let spread = sample.values().iter().map(|v| (v - x).abs()).fold(0.0, f64::max) / h;
    let panels = (spread / PI).ceil() as usize + (4.0 * exponent).ceil() as usize + 1;
    let tol = REL_TOL * exponent.exp();
    integrate_panels(
        |s| sample.mean_cos(s / h, x) * kernel.eval_ft(s) * (exponent * s * s).exp(),
        0.0,
        1.0,
        panels,
        tol,
    )
}

/// Classical deconvolution estimate `fhat(x)` by direct quadrature of the
/// cosine-sum representation.
pub fn fhat_direct(sample: &Sample, x: f64, h: f64, kernel_w: &Kernel) -> Result<f64> {
    Ok(damped_cosine_integral(sample, x, h, kernel_w)? / (PI * h))
}

/// Rescaled kernel `w(x/h) / h`.
pub fn w_h(kernel: &Kernel, x: f64, h: f64) -> f64 {
    kernel.eval_closed_form(x / h) / h
}

/// `fhat / (1 - p) - p / (1 - p) * w_h`, the atom-corrected combination.
pub fn combine(fhat: f64, wh: f64, p: f64) -> f64 {
    fhat / (1.0 - p) - p / (1.0 - p) * wh
}

fn check_p(p: f64) -> Result<()> {
    if (0.0..1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::invalid("p", format!("must lie in [0, 1), got {p}")))
    }
}

/// Density estimate when the atom mass `p` is known.
pub fn f_known_p(sample: &Sample, x: f64, h: f64, p: f64, kernel_w: &Kernel) -> Result<f64> {
    check_p(p)?;
    let fhat = fhat_direct(sample, x, h, kernel_w)?;
    Ok(combine(fhat, w_h(kernel_w, x, h), p))
}

/// Raw atom estimate
/// `(g/2) int_{-1/g}^{1/g} phi_emp(t) phi_k(g t) exp(sigma^2 t^2 / 2) dt`.
///
/// Evaluated after the substitution `t = s / g` and folding onto `[0, 1]`,
/// where the odd imaginary part vanishes identically.
pub fn p_raw(sample: &Sample, g: f64, kernel_k: &Kernel) -> Result<f64> {
    damped_cosine_integral(sample, 0.0, g, kernel_k)
}

/// Atom estimate truncated from above at `1 - eps_n`.
pub fn p_hat(sample: &Sample, g: f64, eps_n: f64, kernel_k: &Kernel) -> Result<PEstimate> {
    if !(eps_n > 0.0 && eps_n < 1.0) {
        return Err(Error::invalid("eps_n", format!("must lie in (0, 1), got {eps_n}")));
    }
    Ok(PEstimate::from_raw(p_raw(sample, g, kernel_k)?, g, eps_n))
}

/// Damped kernel `k_g(x) = (1/2pi) int_{-1}^{1} exp(-i t x) phi_k(t) exp(sigma^2 t^2 / (2 g^2)) dt`.
pub fn damped_kernel(kernel: &Kernel, x: f64, g: f64, sigma: f64) -> Result<f64> {
    let rate = check_damping(sigma, g)?;
    let panels = (x.abs() / PI).ceil() as usize + (4.0 * rate).ceil() as usize + 1;
    let tol = REL_TOL * 1e-2 * rate.exp();
    let v = integrate_panels(|t| (t * x).cos() * kernel.eval_ft(t) * (rate * t * t).exp(), 0.0, 1.0, panels, tol)?;
    Ok(v / PI)
}

/// Atom estimate as a kernel sum `(pi/n) sum_j k_g(-X_j / g)`, an
/// observation-by-observation route independent of [`p_raw`].
pub fn p_raw_kernel_sum(sample: &Sample, g: f64, kernel_k: &Kernel) -> Result<f64> {
    let mut acc = 0.0;
    for &x in sample.values() {
        acc += damped_kernel(kernel_k, -x / g, g, sample.sigma())?;
    }
    Ok(PI * acc / sample.len() as f64)
}

/// Plug-in density estimate at `x` with `p` replaced by its truncated estimate.
pub fn f_star(sample: &Sample, x: f64, config: &EstimatorConfig) -> Result<f64> {
    let p = p_hat(sample, config.g, config.eps_n, &config.kernel_k)?;
    f_star_with(sample, x, config.h, p.p_hat, &config.kernel_w)
}

/// Plug-in combination with a caller-supplied atom estimate.
pub fn f_star_with(sample: &Sample, x: f64, h: f64, p_hat: f64, kernel_w: &Kernel) -> Result<f64> {
    if !(p_hat < 1.0) {
        return Err(Error::invalid("p_hat", format!("must be below 1, got {p_hat}")));
    }
    let fhat = fhat_direct(sample, x, h, kernel_w)?;
    Ok(combine(fhat, w_h(kernel_w, x, h), p_hat))
}

/// Classical estimator on the FFT grid.
pub fn fhat_grid(sample: &Sample, h: f64, kernel_w: &Kernel, grid: &GridConfig) -> Result<DensityGrid> {
    fourier_grid(
        |t| empirical_cf(sample, t),
        |t| kernel_w.eval_ft(t),
        h,
        sample.sigma(),
        grid,
        EstimatorTag::Classical,
    )
}

/// `w_h` on the FFT grid: inverse transform of `phi_w(h t)` with no damping.
pub fn w_h_grid(kernel_w: &Kernel, h: f64, grid: &GridConfig) -> Result<DensityGrid> {
    fourier_grid(|_| Complex64::new(1.0, 0.0), |t| kernel_w.eval_ft(t), h, 0.0, grid, EstimatorTag::KernelShape)
}

fn combine_grids(fhat: &DensityGrid, wh: &DensityGrid, p: f64, tag: EstimatorTag) -> DensityGrid {
    DensityGrid {
        xs: fhat.xs.clone(),
        values: fhat.values.iter().zip(&wh.values).map(|(f, w)| combine(*f, *w, p)).collect(),
        config: fhat.config,
        estimator_tag: tag,
    }
}

/// Known-`p` density estimate on the FFT grid.
pub fn f_known_p_grid(sample: &Sample, h: f64, p: f64, kernel_w: &Kernel, grid: &GridConfig) -> Result<DensityGrid> {
    check_p(p)?;
    let fhat = fhat_grid(sample, h, kernel_w, grid)?;
    let wh = w_h_grid(kernel_w, h, grid)?;
    Ok(combine_grids(&fhat, &wh, p, EstimatorTag::KnownP))
}

/// Plug-in density estimate on the FFT grid, with the atom estimate used.
pub fn f_star_grid(sample: &Sample, config: &EstimatorConfig) -> Result<(DensityGrid, PEstimate)> {
    let p = p_hat(sample, config.g, config.eps_n, &config.kernel_k)?;
    let grid = f_star_grid_with(sample, config.h, p.p_hat, &config.kernel_w, &config.grid)?;
    Ok((grid, p))
}

/// Plug-in grid with a caller-supplied atom estimate.
pub fn f_star_grid_with(
    sample: &Sample,
    h: f64,
    p_hat: f64,
    kernel_w: &Kernel,
    grid: &GridConfig,
) -> Result<DensityGrid> {
    if !(p_hat < 1.0) {
        return Err(Error::invalid("p_hat", format!("must be below 1, got {p_hat}")));
    }
    let fhat = fhat_grid(sample, h, kernel_w, grid)?;
    let wh = w_h_grid(kernel_w, h, grid)?;
    Ok(combine_grids(&fhat, &wh, p_hat, EstimatorTag::PlugIn))
}
