//! Numerical building blocks shared by the estimators.

mod grid;
mod quadrature;
mod sample;
mod special;

pub use grid::{
    fft_grid_eval, simpson_weight, DensityGrid, EstimatorTag, GridConfig, DEFAULT_COVERAGE, DEFAULT_POINTS,
};
pub(crate) use grid::fourier_grid;
pub use quadrature::{integrate, integrate_panels, DEFAULT_TOL, MAX_DEPTH};
pub use sample::{empirical_cf, Sample};
pub use special::gamma;
