//! Small numerical kernels: adaptive quadrature, bracketed root finding,
//! and log-space helpers used by the deep-tail computations.

use crate::error::{Error, Result};

/// Controls for the adaptive quadrature used by the potential integrals.
#[derive(Debug, Clone, Copy)]
pub struct QuadratureSettings {
    pub abs_tol: f64,
    pub max_subdivisions: u32,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        Self { abs_tol: 1e-12, max_subdivisions: 60 }
    }
}

fn simpson(h: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    h / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn adapt<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(m - a, fa, flm, fm);
    let right = simpson(b - m, fm, frm, fb);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol {
        return Ok(left + right + delta / 15.0);
    }
    if depth == 0 {
        return Err(Error::Numerical(format!(
            "quadrature did not converge on [{a}, {b}] (subdivision limit)"
        )));
    }
    let half = 0.5 * tol;
    Ok(adapt(f, a, m, fa, flm, fm, left, half, depth - 1)?
        + adapt(f, m, b, fm, frm, fb, right, half, depth - 1)?)
}

/// Adaptive Simpson integral of `f` over `[a, b]` to absolute tolerance
/// `settings.abs_tol`. The integrand must be finite on the closed interval.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    settings: QuadratureSettings,
) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let fa = f(a);
    let fm = f(0.5 * (a + b));
    let fb = f(b);
    if !(fa.is_finite() && fm.is_finite() && fb.is_finite()) {
        return Err(Error::Numerical(format!(
            "non-finite integrand on [{a}, {b}]"
        )));
    }
    let whole = simpson(b - a, fa, fm, fb);
    adapt(&f, a, b, fa, fm, fb, whole, settings.abs_tol, settings.max_subdivisions)
}

/// Root of a continuous, strictly monotone `f` on `[lo, hi]` by bisection.
/// Requires a sign change on the bracket; refines until the bracket width
/// drops below `xtol` (absolute) and returns the midpoint.
pub fn bisect_root<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, xtol: f64) -> Result<f64> {
    let (mut lo, mut hi) = (lo, hi);
    let flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() || !flo.is_finite() || !fhi.is_finite() {
        return Err(Error::Numerical(format!(
            "no sign change on bracket [{lo}, {hi}]: f(lo)={flo:e}, f(hi)={fhi:e}"
        )));
    }
    let falling = flo > 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo < xtol {
            return Ok(mid);
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if (fm > 0.0) == falling {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// log(sum(exp(v))) without overflow; -inf for an empty slice.
pub fn logsumexp(v: &[f64]) -> f64 {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + v.iter().map(|&x| (x - m).exp()).sum::<f64>().ln()
}

/// Cumulative log-factorials: entry k holds ln(k!).
pub fn ln_factorials(n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for k in 1..=n {
        acc += (k as f64).ln();
        out.push(acc);
    }
    out
}
