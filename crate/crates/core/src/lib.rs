//! Kernel-type deconvolution for a density with an atom at zero.
//!
//! Observations follow `X = B V + sigma Z` where `B` is Bernoulli with
//! `P(B = 0) = p`, `V` has density `f` and `Z` is standard normal with known
//! `sigma`. The crate estimates both the atom mass `p` and the density `f`
//! from the empirical characteristic function of `X`, evaluates the density
//! estimates on a grid with an FFT, and provides the asymptotic variance
//! predictors and a Monte Carlo harness used to check them.
//!
//! Module map:
//!
//! * [`kernels`]: compactly supported Fourier kernels and their constants.
//! * [`numerics`]: quadrature, empirical characteristic function, FFT grid.
//! * [`estimators`]: density and atom estimators, FFT and quadrature paths.
//! * [`asymptotics`]: bandwidth schedules and standard-deviation predictors.
//! * [`simulation`]: ground-truth models, seeded sampling, Monte Carlo studies.

pub mod asymptotics;
pub mod error;
pub mod estimators;
pub mod kernels;
pub mod numerics;
pub mod simulation;

pub use error::{Error, Result};
pub use estimators::{EstimatorConfig, PEstimate};
pub use kernels::{Kernel, KernelKind};
pub use numerics::{DensityGrid, GridConfig, Sample};
pub use simulation::{Family, MCSummary, ModelSpec};

/// Largest admissible value of `sigma^2 / (2 h^2)`; beyond it the damping
/// factor leaves the double-precision range.
pub const EXPONENT_CAP: f64 = 700.0;

pub(crate) fn check_damping(sigma: f64, bandwidth: f64) -> Result<f64> {
    let exponent = sigma * sigma / (2.0 * bandwidth * bandwidth);
    if exponent > EXPONENT_CAP || !exponent.is_finite() {
        return Err(Error::ExponentOverflow { exponent, cap: EXPONENT_CAP });
    }
    Ok(exponent)
}
