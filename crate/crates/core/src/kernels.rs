//! Compactly supported Fourier kernels.
//!
//! A kernel is described by its Fourier transform `phi`, supported on
//! `[-1, 1]`, together with the constants of its expansion at the support
//! edge, `phi(1 - t) ~ edge_const * t^alpha`. Two roles exist: density
//! kernels (`phi(0) = 1`) smooth the density estimate, and atom kernels
//! (`int phi = 2`, vanishing like `t^gamma` at the origin) drive the
//! estimator of the point mass.
//!
//! The kernel in physical space is
//! `k(x) = (1/2pi) int_{-1}^{1} exp(-i t x) phi(t) dt`; built-in kernels
//! carry its closed form.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::numerics::{gamma, integrate, integrate_panels};

/// A real function of one variable shared between threads.
pub type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Role of a kernel in the estimators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    /// Smoothing kernel for the density, normalised by `phi(0) = 1`.
    Density,
    /// Kernel for the atom estimator, normalised by `int phi = 2`.
    Atom,
}

/// Leading behaviour `phi(t) ~ coeff * t^order` at the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OriginOrder {
    pub order: f64,
    pub coeff: f64,
}

/// A symmetric kernel with Fourier transform supported on `[-1, 1]`.
#[derive(Clone)]
pub struct Kernel {
    name: String,
    kind: KernelKind,
    ft: RealFn,
    closed_form: Option<RealFn>,
    // Below this |x| the closed form cancels catastrophically and the
    // inverse-Fourier integral is used instead.
    closed_form_cutoff: f64,
    alpha: f64,
    edge_const: f64,
    origin: Option<OriginOrder>,
    ft_integral: f64,
}

impl fmt::Debug for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Kernel")
            .field("name", &self.name)
            .field("kind", &self.kind)
            .field("alpha", &self.alpha)
            .field("edge_const", &self.edge_const)
            .field("origin", &self.origin)
            .field("ft_integral", &self.ft_integral)
            .finish()
    }
}

/// Names of the built-in kernels.
pub const BUILTIN_NAMES: [&str; 3] = ["deconv_w", "atom_k", "sextic_w"];

const INVERSION_TOL: f64 = 1e-13;

impl Kernel {
    /// Density kernel with `phi(t) = (1 - t^2)^2`; `A = 4`, `alpha = 2`.
    pub fn deconv_w() -> Self {
        Kernel {
            name: "deconv_w".into(),
            kind: KernelKind::Density,
            ft: Arc::new(|t: f64| (1.0 - t * t).powi(2)),
            closed_form: Some(Arc::new(|x: f64| {
                let (s, c) = x.sin_cos();
                -8.0 * (3.0 * x * c + (x * x - 3.0) * s) / (PI * x.powi(5))
            })),
            closed_form_cutoff: 0.5,
            alpha: 2.0,
            edge_const: 4.0,
            origin: None,
            ft_integral: 16.0 / 15.0,
        }
    }

    /// Atom kernel with `phi(t) = (693/8) t^6 (1 - t^2)^2`;
    /// `B = 693/8`, `gamma = 6`, `C = 693/2`, `alpha = 2`.
    pub fn atom_k() -> Self {
        Kernel {
            name: "atom_k".into(),
            kind: KernelKind::Atom,
            ft: Arc::new(|t: f64| 693.0 / 8.0 * t.powi(6) * (1.0 - t * t).powi(2)),
            closed_form: Some(Arc::new(|x: f64| {
                let (s, c) = x.sin_cos();
                let x2 = x * x;
                let cos_poly = x * (-151_200.0 + x2 * (21_840.0 + x2 * (-730.0 + 7.0 * x2)));
                let sin_poly = 453_600.0 + x2 * (-216_720.0 + x2 * (13_950.0 + x2 * (-255.0 + x2)));
                -(2079.0 * cos_poly * c + 693.0 * sin_poly * s) / (PI * x.powi(11))
            })),
            // The polynomial coefficients reach 3e8, so the rational form
            // only becomes accurate well away from the origin.
            closed_form_cutoff: 2.0,
            alpha: 2.0,
            edge_const: 693.0 / 2.0,
            origin: Some(OriginOrder { order: 6.0, coeff: 693.0 / 8.0 }),
            ft_integral: 2.0,
        }
    }

    /// Density kernel with `phi(t) = (1 - t^2)^3`; `A = 8`, `alpha = 3`.
    pub fn sextic_w() -> Self {
        Kernel {
            name: "sextic_w".into(),
            kind: KernelKind::Density,
            ft: Arc::new(|t: f64| (1.0 - t * t).powi(3)),
            closed_form: Some(Arc::new(|x: f64| {
                let (s, c) = x.sin_cos();
                (48.0 * x * (x * x - 15.0) * c - 144.0 * (2.0 * x * x - 5.0) * s) / (PI * x.powi(7))
            })),
            closed_form_cutoff: 0.5,
            alpha: 3.0,
            edge_const: 8.0,
            origin: None,
            ft_integral: 32.0 / 35.0,
        }
    }

    /// Looks up a built-in kernel by name.
    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "deconv_w" => Some(Self::deconv_w()),
            "atom_k" => Some(Self::atom_k()),
            "sextic_w" => Some(Self::sextic_w()),
            _ => None,
        }
    }

    /// User-supplied kernel given by its Fourier transform on `[-1, 1]`.
    ///
    /// The physical-space kernel is synthesised by quadrature. Symmetry and
    /// the normalisation of the requested `kind` are checked numerically.
    pub fn custom<F>(
        name: impl Into<String>,
        kind: KernelKind,
        ft: F,
        alpha: f64,
        edge_const: f64,
        origin: Option<OriginOrder>,
    ) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if !(alpha >= 0.0) {
            return Err(Error::invalid("alpha", format!("must be non-negative, got {alpha}")));
        }
        let ft: RealFn = Arc::new(ft);
        for i in 0..=20 {
            let t = i as f64 / 20.0;
            let (a, b) = (ft(t), ft(-t));
            if !a.is_finite() || (a - b).abs() > 1e-12 * a.abs().max(1.0) {
                return Err(Error::invalid("ft", format!("not symmetric or not finite at t = {t}")));
            }
        }
        let inner = ft.clone();
        let ft_integral = 2.0 * integrate(move |t| inner(t), 0.0, 1.0, 1e-12)?;
        match kind {
            KernelKind::Density if (ft(0.0) - 1.0).abs() > 1e-12 => {
                return Err(Error::invalid("ft", "density kernels need phi(0) = 1"));
            }
            KernelKind::Atom if (ft_integral - 2.0).abs() > 1e-8 => {
                return Err(Error::invalid("ft", format!("atom kernels need int phi = 2, got {ft_integral}")));
            }
            _ => {}
        }
        Ok(Kernel {
            name: name.into(),
            kind,
            ft,
            closed_form: None,
            closed_form_cutoff: 0.0,
            alpha,
            edge_const,
            origin,
            ft_integral,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `A` for density kernels, `C` for atom kernels.
    pub fn edge_const(&self) -> f64 {
        self.edge_const
    }

    pub fn origin(&self) -> Option<OriginOrder> {
        self.origin
    }

    /// `int_{-1}^{1} phi(t) dt`.
    pub fn ft_integral(&self) -> f64 {
        self.ft_integral
    }

    /// Fourier transform `phi(t)`, exactly zero outside `[-1, 1]`.
    pub fn eval_ft(&self, t: f64) -> f64 {
        if t.abs() > 1.0 {
            0.0
        } else {
            (self.ft)(t)
        }
    }

    /// Kernel value in physical space.
    pub fn eval_closed_form(&self, x: f64) -> f64 {
        match &self.closed_form {
            Some(f) if x.abs() >= self.closed_form_cutoff => f(x),
            _ => self.inverse_ft(x),
        }
    }

    /// `(1/pi) int_0^1 cos(t x) phi(t) dt` by adaptive quadrature.
    pub fn inverse_ft(&self, x: f64) -> f64 {
        let panels = (x.abs() / PI).ceil() as usize + 1;
        let ft = &self.ft;
        integrate_panels(|t| (t * x).cos() * ft(t), 0.0, 1.0, panels, INVERSION_TOL)
            .expect("smooth bounded integrand on [0, 1]")
            / PI
    }

    /// `phi(1 - t) / t^alpha`; tends to the edge constant as `t -> 0`.
    pub fn edge_ratio(&self, t: f64) -> f64 {
        self.eval_ft(1.0 - t) / t.powf(self.alpha)
    }

    /// Exponent `d` of the oscillatory tail `|k(x)| ~ c |x|^-d`, `d = alpha + 1`.
    pub fn tail_decay(&self) -> f64 {
        self.alpha + 1.0
    }

    /// Amplitude `c = edge_const * Gamma(alpha + 1) / pi` of the tail.
    pub fn tail_amplitude(&self) -> f64 {
        self.edge_const.abs() * gamma(self.alpha + 1.0) / PI
    }

    /// Maximum of `|closed_form(x) - inverse_ft(x)|` over `points` equally
    /// spaced locations in `[lo, hi]`.
    pub fn fourier_pair_residual(&self, lo: f64, hi: f64, points: usize) -> f64 {
        let points = points.max(2);
        (0..points)
            .map(|i| {
                let x = lo + (hi - lo) * i as f64 / (points - 1) as f64;
                (self.eval_closed_form(x) - self.inverse_ft(x)).abs()
            })
            .fold(0.0, f64::max)
    }

    /// `int x^j k(x) dx`, computed to within `tol`.
    ///
    /// The kernel tail oscillates like `c cos(x - phase) / |x|^d`, so the
    /// integral is taken as the limit of symmetric truncations and averaged
    /// over one period of the cutoff, which removes the leading oscillating
    /// remainder. Orders with `j >= d` have no such limit and are refused.
    pub fn kernel_moment(&self, j: u32, tol: f64) -> Result<f64> {
        if j > 12 {
            return Err(Error::invalid("j", format!("moment order must be at most 12, got {j}")));
        }
        if !(tol > 0.0) {
            return Err(Error::invalid("tol", format!("must be positive, got {tol}")));
        }
        let decay = self.tail_decay();
        if j as f64 >= decay {
            return Err(Error::NonIntegrableMoment { kernel: self.name.clone(), order: j, decay });
        }
        if j % 2 == 1 {
            // Kernels are even.
            return Ok(0.0);
        }
        let gap = decay - j as f64;
        let amp = self.tail_amplitude().max(1e-300);
        let cutoff = (8.0 * amp * gap / tol).powf(1.0 / (gap + 1.0)).max(50.0);
        let period = 2.0 * PI;
        let end = cutoff + period;
        let integrand = |x: f64| {
            let taper = if x <= cutoff { 1.0 } else { (end - x) / period };
            x.powi(j as i32) * self.eval_closed_form(x) * taper
        };
        let panels = (end / 2.0).ceil() as usize;
        let half = integrate_panels(integrand, 0.0, end, panels, 0.05 * tol)?;
        Ok(2.0 * half)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn builtins() -> Vec<Kernel> {
        BUILTIN_NAMES.iter().map(|n| Kernel::by_name(n).unwrap()).collect()
    }

    #[test]
    fn ft_values() {
        let w = Kernel::deconv_w();
        let k = Kernel::atom_k();
        assert_eq!(w.eval_ft(0.0), 1.0);
        assert_eq!(w.eval_ft(0.5), 0.5625);
        assert_eq!(k.eval_ft(1.5), 0.0);
    }

    #[test]
    fn atom_ft_maximum() {
        // Grid search oracle for max of (693/8) t^6 (1 - t^2)^2 on [0, 1].
        let k = Kernel::atom_k();
        let (mut best_t, mut best) = (0.0, 0.0);
        for i in 0..=1_000_000 {
            let t = i as f64 / 1e6;
            let v = 693.0 / 8.0 * t.powi(6) * (1.0 - t * t).powi(2);
            if v > best {
                best = v;
                best_t = t;
            }
        }
        assert!((best_t - 0.6f64.sqrt()).abs() < 1e-5);
        assert!((k.eval_ft(0.6f64.sqrt()) - best).abs() < 1e-9);
        assert!((best - 2.9938).abs() < 5e-5);
    }

    #[test]
    fn support_is_exact() {
        for k in builtins() {
            for t in [1.0 + 1e-12, 1.5, -2.0, 40.0] {
                assert_eq!(k.eval_ft(t), 0.0, "{}", k.name());
            }
        }
    }

    #[test]
    fn closed_form_at_origin() {
        let w = Kernel::deconv_w();
        assert!((w.eval_closed_form(0.0) - 8.0 / (15.0 * PI)).abs() < 1e-13);
        let k = Kernel::atom_k();
        assert!((k.eval_closed_form(0.0) - 1.0 / PI).abs() < 1e-13);
    }

    #[test]
    fn closed_form_far_from_origin_matches_quadrature() {
        let w = Kernel::deconv_w();
        assert!((w.eval_closed_form(10.0) - w.inverse_ft(10.0)).abs() < 1e-8);
    }

    #[test]
    fn fourier_pair_on_grid() {
        for k in builtins() {
            let r = k.fourier_pair_residual(-20.0, 20.0, 101);
            assert!(r < 1e-7, "{}: {r}", k.name());
        }
    }

    #[test]
    fn closed_form_continuous_at_cutoff() {
        for k in builtins() {
            let c = k.closed_form_cutoff;
            let f = k.closed_form.as_ref().unwrap();
            assert!((f(c) - k.inverse_ft(c)).abs() < 1e-9, "{}", k.name());
        }
    }

    #[test]
    fn edge_constants() {
        let expected = [("deconv_w", 4.0, 2.0), ("atom_k", 693.0 / 2.0, 2.0), ("sextic_w", 8.0, 3.0)];
        for (name, c, a) in expected {
            let k = Kernel::by_name(name).unwrap();
            assert_eq!(k.edge_const(), c);
            assert_eq!(k.alpha(), a);
            assert!((k.edge_ratio(1e-4) - c).abs() < 1e-2 * c, "{name}");
        }
        let o = Kernel::atom_k().origin().unwrap();
        assert_eq!((o.coeff, o.order), (693.0 / 8.0, 6.0));
        assert!(Kernel::deconv_w().origin().is_none());
    }

    #[test]
    fn normalisations() {
        let k = Kernel::atom_k();
        let got = integrate(|t| k.eval_ft(t), -1.0, 1.0, 1e-12).unwrap();
        assert!((got - 2.0).abs() < 1e-10);
        assert!((k.ft_integral() - 2.0).abs() < 1e-15);
        // (693/4)(1/7 - 2/9 + 1/11) = 2
        assert!((693.0_f64 / 4.0 * (1.0 / 7.0 - 2.0 / 9.0 + 1.0 / 11.0) - 2.0).abs() < 1e-13);
        for k in builtins() {
            for t in [0.1, 0.33, 0.9] {
                assert_eq!(k.eval_ft(t), k.eval_ft(-t));
            }
        }
    }

    #[test]
    fn moments_of_deconv_w() {
        let w = Kernel::deconv_w();
        assert!((w.kernel_moment(0, 1e-6).unwrap() - 1.0).abs() < 1e-6);
        assert_eq!(w.kernel_moment(1, 1e-6).unwrap(), 0.0);
        assert!((w.kernel_moment(2, 1e-6).unwrap() - 4.0).abs() < 1e-6);
    }

    #[test]
    fn moments_of_other_builtins() {
        let s = Kernel::sextic_w();
        assert!((s.kernel_moment(0, 1e-7).unwrap() - 1.0).abs() < 1e-7);
        assert!((s.kernel_moment(2, 1e-6).unwrap() - 6.0).abs() < 1e-6);
        let k = Kernel::atom_k();
        assert!(k.kernel_moment(0, 1e-6).unwrap().abs() < 1e-6);
    }

    #[test]
    fn divergent_moments_refused() {
        let w = Kernel::deconv_w();
        assert!(matches!(w.kernel_moment(3, 1e-6), Err(Error::NonIntegrableMoment { order: 3, .. })));
        assert!(Kernel::atom_k().kernel_moment(4, 1e-6).is_err());
        assert!(Kernel::sextic_w().kernel_moment(4, 1e-6).is_err());
        assert!(matches!(w.kernel_moment(13, 1e-6), Err(Error::InvalidParameter { field: "j", .. })));
    }

    #[test]
    fn custom_kernel_synthesises_closed_form() {
        let k = Kernel::custom("quad", KernelKind::Density, |t: f64| 1.0 - t * t, 1.0, 2.0, None).unwrap();
        // (1/pi) int_0^1 (1 - t^2) dt = 2 / (3 pi)
        assert!((k.eval_closed_form(0.0) - 2.0 / (3.0 * PI)).abs() < 1e-12);
        let x: f64 = 3.0;
        let exact = 2.0 * (x.sin() - x * x.cos()) / (PI * x.powi(3));
        assert!((k.eval_closed_form(x) - exact).abs() < 1e-11);
        assert!((k.ft_integral() - 4.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn custom_kernel_validation() {
        assert!(Kernel::custom("odd", KernelKind::Density, |t: f64| 1.0 + t, 1.0, 1.0, None).is_err());
        assert!(Kernel::custom("unnorm", KernelKind::Atom, |t: f64| 1.0 - t * t, 1.0, 2.0, None).is_err());
        assert!(Kernel::by_name("nope").is_none());
    }
}
