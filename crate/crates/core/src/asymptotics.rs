//! Bandwidth schedules, variance predictors and exact-mean formulas.
//!
//! The variance of every estimator here is governed by the damped kernel
//! integral `I(h) = int_0^1 phi(s) exp(sigma^2 s^2 / (2 h^2)) ds`, whose
//! small-bandwidth asymptote is
//! `edge_const Gamma(1 + alpha) sigma^(-2(1+alpha)) h^(2(1+alpha)) exp(sigma^2 / (2 h^2))`.
//! The asymptotic standard deviations use the asymptote; the corrected ones
//! use `I(h)` itself, which is far more accurate at practical bandwidths.

use std::f64::consts::PI;

use crate::check_damping;
use crate::error::{Error, Result};
use crate::estimators::w_h;
use crate::kernels::Kernel;
use crate::numerics::{gamma, integrate_panels};
use crate::simulation::ModelSpec;

/// Bandwidths and truncation level for a given sample size.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BandwidthSchedule {
    pub n: u64,
    pub sigma: f64,
    pub eta_n: f64,
    pub delta_n: f64,
    pub h: f64,
    pub g: f64,
    pub eps_n: f64,
    /// `1 / log log log n` before clamping.
    pub eps_raw: f64,
}

/// Upper clamp for the truncation level.
pub const EPS_CLAMP: f64 = 0.99;

/// Example schedule `eta_n = 2 L / log n`, `delta_n = L / log n`,
/// `eps_n = 1 / L` with `L = log log log n`, `eps_n` clamped to `(0, 0.99]`.
pub fn default_schedule(n: u64, sigma: f64) -> Result<BandwidthSchedule> {
    if n < 16 {
        return Err(Error::invalid("n", format!("schedule needs n >= 16, got {n}")));
    }
    if !(sigma > 0.0) {
        return Err(Error::invalid("sigma", format!("must be positive, got {sigma}")));
    }
    let log_n = (n as f64).ln();
    let lll = log_n.ln().ln();
    let eta_n = 2.0 * lll / log_n;
    let delta_n = lll / log_n;
    let eps_raw = 1.0 / lll;
    Ok(BandwidthSchedule {
        n,
        sigma,
        eta_n,
        delta_n,
        h: sigma / ((1.0 + eta_n) * log_n).sqrt(),
        g: sigma / ((1.0 + delta_n) * log_n).sqrt(),
        eps_n: eps_raw.min(EPS_CLAMP),
        eps_raw,
    })
}

fn check_positive(field: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(field, format!("must be positive and finite, got {v}")))
    }
}

/// Asymptote without the `exp(sigma^2 / (2 h^2))` factor.
fn scaled_asymptote(kernel: &Kernel, h: f64, sigma: f64, delta: f64) -> f64 {
    let power = 1.0 + kernel.alpha() + delta;
    kernel.edge_const() * gamma(power) * (h * h / (sigma * sigma)).powf(power)
}

/// `int_0^1 (1-s)^delta phi(s) exp(c (s^2 - 1)) ds` with `c = sigma^2/(2h^2)`.
fn scaled_damped_integral(kernel: &Kernel, h: f64, sigma: f64, delta: f64, rel_tol: f64) -> Result<f64> {
    let c = check_damping(sigma, h)?;
    let scale = scaled_asymptote(kernel, h, sigma, delta).abs().max(1e-300);
    // The integrand concentrates in a layer of width ~1/c below s = 1.
    let panels = (4.0 * c).ceil() as usize + 8;
    integrate_panels(
        |s| (1.0 - s).powf(delta) * kernel.eval_ft(s) * (c * (s * s - 1.0)).exp(),
        0.0,
        1.0,
        panels,
        rel_tol * scale,
    )
}

/// Damped kernel integral `int_0^1 (1-s)^delta phi(s) exp(sigma^2 s^2 / (2 h^2)) ds`.
pub fn damped_ft_integral(kernel: &Kernel, h: f64, sigma: f64, delta: f64) -> Result<f64> {
    check_positive("h", h)?;
    check_positive("sigma", sigma)?;
    let c = check_damping(sigma, h)?;
    Ok(scaled_damped_integral(kernel, h, sigma, delta, 1e-10)? * c.exp())
}

/// Small-bandwidth asymptote of [`damped_ft_integral`]:
/// `edge_const Gamma(1+alpha+delta) sigma^(-2(1+alpha+delta)) h^(2(1+alpha+delta)) exp(sigma^2/(2h^2))`.
pub fn edge_asymptote(kernel: &Kernel, h: f64, sigma: f64, delta: f64) -> Result<f64> {
    check_positive("h", h)?;
    check_positive("sigma", sigma)?;
    if !(delta >= 0.0) {
        return Err(Error::invalid("delta", format!("must be non-negative, got {delta}")));
    }
    let c = check_damping(sigma, h)?;
    Ok(scaled_asymptote(kernel, h, sigma, delta) * c.exp())
}

/// Ratio of the damped integral (with `delta = 0`) to its asymptote; tends
/// to one as `h -> 0`.
pub fn edge_asymptote_ratio(kernel: &Kernel, h: f64, sigma: f64) -> Result<f64> {
    check_positive("h", h)?;
    check_positive("sigma", sigma)?;
    let integral = scaled_damped_integral(kernel, h, sigma, 0.0, 1e-10)?;
    Ok(integral / scaled_asymptote(kernel, h, sigma, 0.0))
}

fn check_n(n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::invalid("n", "sample size must be at least 1"));
    }
    Ok(n as f64)
}

/// Limit-theory standard deviation of the raw atom estimate,
/// `g^(2+2alpha) exp(sigma^2/(2g^2)) C Gamma(1+alpha) sigma^(-2(1+alpha)) / sqrt(2n)`.
pub fn asymptotic_sd_p(g: f64, n: usize, sigma: f64, kernel_k: &Kernel) -> Result<f64> {
    let n = check_n(n)?;
    Ok(edge_asymptote(kernel_k, g, sigma, 0.0)? / (2.0 * n).sqrt())
}

/// Corrected standard deviation of the raw atom estimate, `I(g) / sqrt(2n)`.
pub fn corrected_sd_p(g: f64, n: usize, sigma: f64, kernel_k: &Kernel) -> Result<f64> {
    let n = check_n(n)?;
    Ok(damped_ft_integral(kernel_k, g, sigma, 0.0)? / (2.0 * n).sqrt())
}

fn check_p(p: f64) -> Result<()> {
    if (0.0..1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::invalid("p", format!("must lie in [0, 1), got {p}")))
    }
}

/// Limit-theory standard deviation of the known-`p` density estimate,
/// `h^(1+2alpha) exp(sigma^2/(2h^2)) A Gamma(1+alpha) sigma^(-2(1+alpha)) / ((1-p) pi sqrt(2n))`.
pub fn asymptotic_sd_f(h: f64, n: usize, sigma: f64, p: f64, kernel_w: &Kernel) -> Result<f64> {
    let n = check_n(n)?;
    check_p(p)?;
    let alpha = kernel_w.alpha();
    let c = check_damping(sigma, h)?;
    Ok(h.powf(1.0 + 2.0 * alpha) * c.exp() / n.sqrt() * kernel_w.edge_const() * gamma(alpha + 1.0)
        * sigma.powf(-2.0 * (1.0 + alpha))
        / ((1.0 - p) * PI * 2f64.sqrt()))
}

/// Corrected standard deviation of the known-`p` density estimate,
/// `I(h) / ((1-p) pi h sqrt(2n))`.
pub fn corrected_sd_f(h: f64, n: usize, sigma: f64, p: f64, kernel_w: &Kernel) -> Result<f64> {
    let n = check_n(n)?;
    check_p(p)?;
    Ok(damped_ft_integral(kernel_w, h, sigma, 0.0)? / ((1.0 - p) * PI * h * (2.0 * n).sqrt()))
}

/// `(f * w_h)(x)` by quadrature in physical space.
pub fn smoothed_density(model: &ModelSpec, x: f64, h: f64, kernel_w: &Kernel) -> Result<f64> {
    check_positive("h", h)?;
    let (lo, hi) = model.family.support();
    let panels = ((hi - lo) / h).ceil() as usize + 1;
    integrate_panels(|v| model.family.density(v) * w_h(kernel_w, x - v, h), lo, hi, panels, 1e-11)
}

/// `(f * w_h)(x) = (1/pi) int_0^(1/h) Re[exp(-itx) cf_f(t)] phi_w(h t) dt`, the
/// Fourier-side route.
pub fn smoothed_density_fourier(model: &ModelSpec, x: f64, h: f64, kernel_w: &Kernel) -> Result<f64> {
    check_positive("h", h)?;
    let top = 1.0 / h;
    let panels = (top * (x.abs() + model.family.mean().abs() + 1.0) / PI).ceil() as usize + 1;
    let v = integrate_panels(
        |t| (model.family.cf(t) * num_complex::Complex64::from_polar(1.0, -t * x)).re * kernel_w.eval_ft(h * t),
        0.0,
        top,
        panels,
        1e-12,
    )?;
    Ok(v / PI)
}

/// Exact mean of the classical estimator, `p w_h(x) + (1-p) (f * w_h)(x)`.
pub fn expected_fhat(model: &ModelSpec, x: f64, h: f64, kernel_w: &Kernel) -> Result<f64> {
    let smooth = if model.p < 1.0 { smoothed_density(model, x, h, kernel_w)? } else { 0.0 };
    Ok(model.p * w_h(kernel_w, x, h) + (1.0 - model.p) * smooth)
}

/// Bias of the known-`p` estimate,
/// `(1/2pi) int exp(-itx) cf_f(t) (phi_w(h t) - 1) dt`.
pub fn bias_f(model: &ModelSpec, x: f64, h: f64, kernel_w: &Kernel) -> Result<f64> {
    check_positive("h", h)?;
    let top = model.family.cf_cutoff(1e-13).max(1.0 / h);
    let freq = x.abs() + model.family.mean().abs() + model.family.variance().sqrt() + 1.0;
    let panels = (top * freq / PI).ceil() as usize + 2;
    let v = integrate_panels(
        |t| {
            (model.family.cf(t) * num_complex::Complex64::from_polar(1.0, -t * x)).re * (kernel_w.eval_ft(h * t) - 1.0)
        },
        0.0,
        top,
        panels,
        1e-13,
    )?;
    Ok(v / PI)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulation::Family;

    #[test]
    fn schedule_formula() {
        let s = default_schedule(1_000_000, 1.0).unwrap();
        // Independent arithmetic.
        let ln = 13.815_510_557_964_274_f64;
        let lll = ln.ln().ln();
        let eta = 2.0 * lll / ln;
        assert!((s.h - 1.0 / ((1.0 + eta) * ln).sqrt()).abs() < 1e-14);
        assert!((s.g - 1.0 / ((1.0 + lll / ln) * ln).sqrt()).abs() < 1e-14);
        assert!(s.eta_n > s.delta_n && s.delta_n > 0.0);
        assert!(((s.eta_n - s.delta_n) * ln - lll).abs() < 1e-12);
        assert!(s.h < s.g);
    }

    #[test]
    fn schedule_clamps_and_rejects() {
        let s = default_schedule(16, 1.0).unwrap();
        assert!(s.eps_raw > 1.0);
        assert_eq!(s.eps_n, EPS_CLAMP);
        assert!(default_schedule(15, 1.0).is_err());
        let big = default_schedule(u64::MAX, 1.0).unwrap();
        assert!(big.eps_n > 0.0 && big.eps_n <= EPS_CLAMP);
    }

    #[test]
    fn schedule_gap_grows() {
        let gaps: Vec<f64> = [100u64, 10_000, 1_000_000]
            .iter()
            .map(|&n| {
                let s = default_schedule(n, 1.0).unwrap();
                (s.eta_n - s.delta_n) * (n as f64).ln()
            })
            .collect();
        assert!(gaps[0] < gaps[1] && gaps[1] < gaps[2]);
    }

    #[test]
    fn asymptote_values() {
        let e2 = 2f64.exp();
        let a = edge_asymptote(&Kernel::sextic_w(), 0.5, 1.0, 0.0).unwrap();
        assert!((a - 8.0 * 6.0 * 0.5f64.powi(8) * e2).abs() < 1e-12);
        assert!((a - 1.3855).abs() < 1e-4);
        let h: f64 = 0.7;
        let w = edge_asymptote(&Kernel::deconv_w(), h, 1.0, 0.0).unwrap();
        assert!((w - 4.0 * 2.0 * h.powi(6) * (0.5 / (h * h)).exp()).abs() < 1e-12);
        let k = edge_asymptote(&Kernel::atom_k(), 0.5, 1.0, 0.0).unwrap();
        assert!((k - 693.0 * 0.5f64.powi(6) * e2).abs() < 1e-10);
        assert!((k - 80.01).abs() < 0.01);
    }

    #[test]
    fn asymptote_with_delta() {
        // delta = 1 on sextic: A Gamma(5) h^10 e^(1/(2h^2))
        let v = edge_asymptote(&Kernel::sextic_w(), 0.5, 1.0, 1.0).unwrap();
        assert!((v - 8.0 * 24.0 * 0.5f64.powi(10) * 2f64.exp()).abs() < 1e-12);
        assert!(edge_asymptote(&Kernel::sextic_w(), 0.5, 1.0, -1.0).is_err());
    }

    #[test]
    fn sextic_ratio_at_half() {
        let r = edge_asymptote_ratio(&Kernel::sextic_w(), 0.5, 1.0).unwrap();
        assert!((r - 0.4299).abs() < 1e-3, "{r}");
    }

    #[test]
    fn ratio_is_near_one_for_small_bandwidth() {
        let r = edge_asymptote_ratio(&Kernel::deconv_w(), 0.05, 1.0).unwrap();
        assert!((r - 1.0).abs() < 0.01, "{r}");
        for k in [Kernel::deconv_w(), Kernel::atom_k(), Kernel::sextic_w()] {
            let far = (edge_asymptote_ratio(&k, 0.3, 1.0).unwrap() - 1.0).abs();
            let near = (edge_asymptote_ratio(&k, 0.1, 1.0).unwrap() - 1.0).abs();
            assert!(near < far, "{}", k.name());
        }
    }

    #[test]
    fn ratio_is_consistent_with_sd_predictors() {
        let k = Kernel::atom_k();
        for (g, n, s) in [(0.5, 1000, 1.0), (0.45, 500, 0.3), (0.65, 1000, 1.0)] {
            let r = corrected_sd_p(g, n, s, &k).unwrap() / asymptotic_sd_p(g, n, s, &k).unwrap();
            assert!((r - edge_asymptote_ratio(&k, g, s).unwrap()).abs() < 1e-6);
            assert!(r > 0.0 && r < 1.0);
        }
    }

    #[test]
    fn table_sd_values() {
        let k = Kernel::atom_k();
        assert!((asymptotic_sd_p(0.5, 1000, 1.0, &k).unwrap() - 1.7891).abs() < 1e-4);
        assert!((asymptotic_sd_p(0.65, 1000, 1.0, &k).unwrap() - 3.8164).abs() < 1e-4);
        assert!((asymptotic_sd_p(0.45, 500, 0.3, &k).unwrap() - 311.7).abs() < 0.1);
        assert!((corrected_sd_p(0.5, 1000, 1.0, &k).unwrap() - 0.0700).abs() < 0.002);
        assert!((corrected_sd_p(0.45, 500, 0.3, &k).unwrap() - 0.0357).abs() < 0.002);
    }

    #[test]
    fn density_sd_scaling() {
        let w = Kernel::deconv_w();
        let base = asymptotic_sd_f(0.58, 1000, 1.0, 0.0, &w).unwrap();
        let half = asymptotic_sd_f(0.58, 1000, 1.0, 0.5, &w).unwrap();
        assert!((half - 2.0 * base).abs() < 1e-14 * half);
        // Same normalisation as the damped-integral asymptote.
        let via = edge_asymptote(&w, 0.58, 1.0, 0.0).unwrap() / (PI * 0.58 * 2000f64.sqrt());
        assert!((base - via).abs() < 1e-12 * base);
        let ratio = corrected_sd_f(0.58, 1000, 1.0, 0.1, &w).unwrap() / asymptotic_sd_f(0.58, 1000, 1.0, 0.1, &w).unwrap();
        assert!((ratio - edge_asymptote_ratio(&w, 0.58, 1.0).unwrap()).abs() < 1e-6);
        assert!(asymptotic_sd_f(0.58, 1000, 1.0, 1.0, &w).is_err());
    }

    #[test]
    fn expected_mean_routes_agree() {
        let m = ModelSpec::new(0.0, Family::Normal { mean: 3.0, variance: 9.0 }, 1.0).unwrap();
        let w = Kernel::deconv_w();
        for x in [0.0, 3.0, 7.5] {
            let space = expected_fhat(&m, x, 0.58, &w).unwrap();
            let fourier = smoothed_density_fourier(&m, x, 0.58, &w).unwrap();
            assert!((space - fourier).abs() < 1e-6, "x = {x}: {space} vs {fourier}");
        }
    }

    #[test]
    fn expected_mean_grows_at_origin() {
        let m = ModelSpec::normal_example();
        let w = Kernel::deconv_w();
        let vals: Vec<f64> = [0.5, 0.2, 0.1].iter().map(|&h| expected_fhat(&m, 0.0, h, &w).unwrap()).collect();
        assert!(vals[0] < vals[1] && vals[1] < vals[2]);
        for (&h, v) in [0.5, 0.2, 0.1].iter().zip(&vals) {
            let atom_part = m.p * w.eval_closed_form(0.0) / h;
            assert!(v - atom_part < 0.2);
        }
    }

    #[test]
    fn bias_routes_agree_and_vanish() {
        let m = ModelSpec::normal_example();
        let w = Kernel::deconv_w();
        let mut last = f64::INFINITY;
        for h in [0.5, 0.2, 0.1, 0.05] {
            let b = bias_f(&m, 3.0, h, &w).unwrap();
            assert!(b.abs() < last);
            last = b.abs();
        }
        for (x, h) in [(3.0, 0.58), (0.0, 0.5), (6.0, 0.8)] {
            let spatial = smoothed_density(&m, x, h, &w).unwrap() - m.family.density(x);
            let fourier = bias_f(&m, x, h, &w).unwrap();
            assert!((spatial - fourier).abs() < 1e-6, "x = {x}, h = {h}");
        }
    }
}
