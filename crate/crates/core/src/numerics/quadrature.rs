//! Adaptive Simpson quadrature.

use crate::error::{Error, Result};

/// Default absolute tolerance for [`integrate`].
pub const DEFAULT_TOL: f64 = 1e-9;
/// Recursion depth cap for [`integrate`].
pub const MAX_DEPTH: u32 = 40;

/// Integrates `f` over `[a, b]` with adaptive Simpson's rule and Richardson
/// extrapolation, to an estimated absolute error of `tol`.
///
/// Returns [`Error::MaxDepthExceeded`] if some subinterval still fails the
/// error test after [`MAX_DEPTH`] bisections.
pub fn integrate<F>(f: F, a: f64, b: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if !(a <= b) {
        return Err(Error::invalid("interval", format!("need a <= b, got [{a}, {b}]")));
    }
    if !(tol > 0.0) {
        return Err(Error::invalid("tol", format!("must be positive, got {tol}")));
    }
    if a == b {
        return Ok(0.0);
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = simpson(a, b, fa, fm, fb);
    refine(&f, a, b, fa, fm, fb, whole, tol, 0)
}

/// Splits `[a, b]` into `panels` equal pieces and integrates each adaptively.
///
/// Used for long oscillatory ranges where a single top-level Simpson
/// estimate can alias to a spuriously converged value.
pub fn integrate_panels<F>(f: F, a: f64, b: f64, panels: usize, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let panels = panels.max(1);
    let width = (b - a) / panels as f64;
    let panel_tol = tol / panels as f64;
    let mut total = 0.0;
    for i in 0..panels {
        let lo = a + width * i as f64;
        let hi = if i + 1 == panels { b } else { a + width * (i + 1) as f64 };
        total += integrate(&f, lo, hi, panel_tol)?;
    }
    Ok(total)
}

#[inline]
fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn refine<F>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    // Roundoff floor: once the correction is at the level of accumulated
    // rounding in the panel sum, further bisection cannot improve it.
    let floor = 64.0 * f64::EPSILON * (left.abs() + right.abs());
    if delta.abs() <= 15.0 * tol || delta.abs() <= floor {
        return Ok(left + right + delta / 15.0);
    }
    if depth >= MAX_DEPTH || lm <= a || rm >= b {
        return Err(Error::MaxDepthExceeded { a, b, depth });
    }
    let l = refine(f, a, m, fa, flm, fm, left, 0.5 * tol, depth + 1)?;
    let r = refine(f, m, b, fm, frm, fb, right, 0.5 * tol, depth + 1)?;
    Ok(l + r)
}
