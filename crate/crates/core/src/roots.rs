//! Scalar root finding for monotone functions.

use crate::error::{Error, Result};

/// Settings for [`solve_increasing`].
#[derive(Debug, Clone, Copy)]
pub struct MonotoneSolve {
    /// Bisect until the bracket is at most this wide before switching to Newton.
    pub bisect_width: f64,
    /// Absolute residual accepted as converged.
    pub residual_tol: f64,
    pub max_iter: usize,
    /// Double the upper end of the bracket until it encloses the target.
    pub expand_upper: bool,
}

/// Solve `f(x) = target` for `f` strictly increasing on `[lo, ∞)`.
///
/// `f` returns the value and the derivative. The root is bracketed in
/// `[lo, hi]` (with `hi` doubled when `expand_upper` is set), bisected down
/// to `bisect_width`, and polished with Newton steps that fall back to
/// bisection whenever they leave the bracket.
pub fn solve_increasing<F>(mut f: F, target: f64, lo: f64, hi: f64, opts: MonotoneSolve) -> Result<f64>
where
    F: FnMut(f64) -> Result<(f64, f64)>,
{
    let (mut lo, mut hi) = (lo, hi);
    let (flo, _) = f(lo)?;
    if flo - target >= 0.0 {
        return Ok(lo);
    }
    let mut iterations = 0usize;
    let (mut fhi, _) = f(hi)?;
    while fhi < target {
        if !opts.expand_upper || iterations >= opts.max_iter || !fhi.is_finite() {
            return Err(Error::Solver { iterations, residual: target - fhi });
        }
        lo = hi;
        hi *= 2.0;
        fhi = f(hi)?.0;
        iterations += 1;
    }
    if fhi == target {
        return Ok(hi);
    }

    while hi - lo > opts.bisect_width {
        let mid = 0.5 * (lo + hi);
        let (fm, _) = f(mid)?;
        if fm == target {
            return Ok(mid);
        }
        if fm < target {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
        if iterations > opts.max_iter {
            return Err(Error::Solver { iterations, residual: fm - target });
        }
    }

    let mut x = 0.5 * (lo + hi);
    let mut residual = f64::INFINITY;
    for _ in 0..opts.max_iter {
        let (fx, dfx) = f(x)?;
        if !fx.is_finite() {
            return Err(Error::Evaluation(format!("non-finite residual at {x}")));
        }
        residual = fx - target;
        if residual.abs() <= opts.residual_tol {
            return Ok(x);
        }
        if residual < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let newton = x - residual / dfx;
        let next = if dfx > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if (next - x).abs() <= 4.0 * f64::EPSILON * x.abs().max(f64::MIN_POSITIVE)
            || hi - lo <= 4.0 * f64::EPSILON * x.abs()
        {
            return Ok(next);
        }
        x = next;
    }
    Err(Error::Solver { iterations: opts.max_iter + iterations, residual })
}

/// Plain bisection for a sign change of `f` on `[a, b]`, down to width `tol`.
///
/// Returns the final bracket.
pub fn bisect<F>(mut f: F, a: f64, b: f64, tol: f64, max_iter: usize) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let (mut a, mut b) = (a, b);
    let fa = f(a)?;
    let fb = f(b)?;
    if fa == 0.0 {
        return Ok((a, a));
    }
    if fb == 0.0 {
        return Ok((b, b));
    }
    if fa.signum() == fb.signum() {
        return Err(Error::domain(format!("no sign change on [{a}, {b}]")));
    }
    let mut sa = fa.signum();
    for _ in 0..max_iter {
        if (b - a).abs() <= tol {
            return Ok((a, b));
        }
        let m = 0.5 * (a + b);
        let fm = f(m)?;
        if fm == 0.0 {
            return Ok((m, m));
        }
        if fm.signum() == sa {
            a = m;
            sa = fm.signum();
        } else {
            b = m;
        }
    }
    Err(Error::Solver { iterations: max_iter, residual: b - a })
}
