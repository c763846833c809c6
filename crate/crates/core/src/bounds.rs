//! Bounds for optimal extension constants.
//!
//! Every constant here is the fourth power of the best constant in the
//! bilinear (`L⁴`) form of the extension inequality. Lower bounds come from
//! boundary values of the convolution and from Gaussian-type trial
//! functions; upper bounds from the supremum of the convolution density.

use std::f64::consts::PI;

use serde::Serialize;

use crate::config::NumericConfig;
use crate::error::{Error, Result};
use crate::geometry::SurfaceSpec;
use crate::linalg::Vec2;
use crate::purepower::{boundary_value, conv_pp, conv_quartic_closed, support_edge};
use crate::quadrature::{integrate, QuadResult};
use crate::special::gamma_fn;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Bound {
    pub value: f64,
    /// Which formula produced the value.
    pub provenance: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundsReport {
    pub lower: Vec<Bound>,
    pub upper: Vec<Bound>,
    pub best_lower: f64,
    pub best_upper: f64,
}

impl BoundsReport {
    pub fn new(lower: Vec<(f64, &str)>, upper: Vec<(f64, &str)>) -> Self {
        let wrap = |v: Vec<(f64, &str)>| -> Vec<Bound> {
            v.into_iter().map(|(value, p)| Bound { value, provenance: p.to_string() }).collect()
        };
        let lower = wrap(lower);
        let upper = wrap(upper);
        let best_lower = lower.iter().map(|b| b.value).fold(f64::NEG_INFINITY, f64::max);
        let best_upper = upper.iter().map(|b| b.value).fold(f64::INFINITY, f64::min);
        BoundsReport { lower, upper, best_lower, best_upper }
    }

    /// Value of the lower bound with the given provenance label.
    pub fn lower_by(&self, provenance: &str) -> Option<f64> {
        self.lower.iter().find(|b| b.provenance == provenance).map(|b| b.value)
    }
}

pub const PROV_EXACT: &str = "exact constant";
pub const PROV_BOUNDARY: &str = "boundary value";
pub const PROV_GAMMA: &str = "gamma trial";
pub const PROV_CURVE: &str = "boundary curve sup";
pub const PROV_AXIS: &str = "vertical axis limit";
pub const PROV_SUP: &str = "density sup";

/// Trial-function lower bound for `|y|^p` with weight `|y|^{(p−2)/2}`:
/// `π/(p 2^{1−2/p}) · Γ(1/2 + 1/p)² / Γ(2/p)`.
pub fn gamma_lower_pp(p: f64) -> Result<f64> {
    if !(p >= 2.0) || !p.is_finite() {
        return Err(Error::domain(format!("gamma bound needs p ≥ 2, got {p}")));
    }
    let g = gamma_fn(0.5 + 1.0 / p)?;
    Ok(PI / (p * 2f64.powf(1.0 - 2.0 / p)) * g * g / gamma_fn(2.0 / p)?)
}

/// Lower and upper bounds for the pure power `p`.
pub fn pp_bounds(p: f64) -> Result<BoundsReport> {
    let gamma = gamma_lower_pp(p)?;
    Ok(BoundsReport::new(vec![(boundary_value(p), PROV_BOUNDARY), (gamma, PROV_GAMMA)], vec![(PI / p, PROV_SUP)]))
}

/// `ln Γ(1/2+1/p)² − ln(2^{1−2/p} Γ(2/p)/√(p−1))`, positive exactly where the
/// gamma bound beats the boundary bound.
pub fn crossover_gap(p: f64) -> Result<f64> {
    let lhs = 2.0 * gamma_fn(0.5 + 1.0 / p)?.ln();
    let rhs = (1.0 - 2.0 / p) * 2f64.ln() + gamma_fn(2.0 / p)?.ln() - 0.5 * (p - 1.0).ln();
    Ok(lhs - rhs)
}

/// The exponent where the gamma bound and the boundary bound cross, found by
/// bisection on `[2.5, 10]` down to `tol` and a final secant step.
pub fn crossover_p0(tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::domain(format!("tolerance must be positive, got {tol}")));
    }
    let (mut a, mut b) = (2.5, 10.0);
    let (mut fa, mut fb) = (crossover_gap(a)?, crossover_gap(b)?);
    if !(fa > 0.0 && fb < 0.0) {
        return Err(Error::Solver { iterations: 0, residual: fa.min(fb) });
    }
    let mut iterations = 0;
    while b - a > tol {
        let m = 0.5 * (a + b);
        let fm = crossover_gap(m)?;
        if fm > 0.0 {
            a = m;
            fa = fm;
        } else {
            b = m;
            fb = fm;
        }
        iterations += 1;
        if iterations > 200 {
            return Err(Error::Solver { iterations, residual: fm });
        }
    }
    Ok(a + fa * (b - a) / (fa - fb))
}

/// `π(1 + ar) / (2√((1+2r)(1+6r)))`: the weighted boundary value of the
/// quartic-mixed surface at `|ξ/2|² = r`.
pub fn boundary_curve(a: f64, r: f64) -> f64 {
    PI * (1.0 + a * r) / (2.0 * ((1.0 + 2.0 * r) * (1.0 + 6.0 * r)).sqrt())
}

/// `sup_{r ≥ 0}` of [`boundary_curve`]: golden section on `[0, 10³]` in the
/// variable `ln(1+r)`, compared against `r = 0` and the limit `aπ/(4√3)`.
pub fn boundary_curve_sup(a: f64, _cfg: &NumericConfig) -> Result<f64> {
    if !(a > 2.0) || !a.is_finite() {
        return Err(Error::domain(format!("boundary curve sup needs a > 2, got {a}")));
    }
    let f = |u: f64| boundary_curve(a, u.exp_m1());
    let (mut lo, mut hi) = (0.0, 1e3f64.ln_1p());
    // coarse scan to locate the best cell, then refine inside it
    let cells = 64;
    let step = (hi - lo) / cells as f64;
    let best = (0..=cells).max_by(|&i, &j| f(i as f64 * step).total_cmp(&f(j as f64 * step))).unwrap_or(0);
    lo = (best as f64 - 1.0).max(0.0) * step;
    hi = ((best + 1) as f64 * step).min(hi);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > 1e-12 * (1.0 + hi) {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        }
    }
    let limit = a * PI / (4.0 * 3f64.sqrt());
    Ok(f1.max(f2).max(f(0.0)).max(limit))
}

/// Bounds for `ψ = |y|² + |y|⁴` with weight `(1 + a|y|²)^{1/2}`.
pub fn quartic_bounds(a: f64, cfg: &NumericConfig) -> Result<BoundsReport> {
    if !(a >= 0.0) || !a.is_finite() {
        return Err(Error::domain(format!("quartic bounds need a ≥ 0, got {a}")));
    }
    if a <= 2.0 {
        return Ok(BoundsReport::new(vec![(0.5 * PI, PROV_EXACT)], vec![(0.5 * PI, PROV_EXACT)]));
    }
    let gamma = a * gamma_lower_pp(4.0)?;
    Ok(BoundsReport::new(
        vec![
            (0.5 * PI, PROV_BOUNDARY),
            (a * PI / (4.0 * 3f64.sqrt()), PROV_AXIS),
            (gamma, PROV_GAMMA),
            (boundary_curve_sup(a, cfg)?, PROV_CURVE),
        ],
        vec![(a * PI / 4.0, PROV_SUP)],
    ))
}

/// `∫_0^∞ h(ρ) ρ dρ`, truncated where `decay(ρ)` (the exponent of the
/// Gaussian-type factor) exceeds 80.
fn radial_integral<H, D>(h: H, decay: D) -> Result<f64>
where
    H: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let mut edge = 1.0;
    let mut doublings = 0;
    while decay(edge) < 80.0 {
        edge *= 2.0;
        doublings += 1;
        if doublings > 200 || !edge.is_finite() {
            return Err(Error::Integrability("trial function does not decay".into()));
        }
    }
    // split geometrically so the adaptive rule sees the bulk and the tail apart
    let mut total = 0.0;
    let mut a = 0.0;
    let mut b = edge / 2f64.powi(30);
    while a < edge {
        let QuadResult { value, .. } = integrate(|r| Ok(h(r) * r), a, b, 1e-300, 1e-12, 400)?;
        total += value;
        a = b;
        b = (2.0 * b).min(edge);
    }
    if !total.is_finite() {
        return Err(Error::Integrability("trial integral is not finite".into()));
    }
    Ok(total)
}

/// `‖f_s‖⁴ / ∫_E e^{−2sτ}` with `f_s = e^{−sψ}√w` and `E` the support of
/// `σ ∗ σ`, maximised over `svals`. Radial surfaces only.
pub fn lower_bound_exp(s: &SurfaceSpec, svals: &[f64], _cfg: &NumericConfig) -> Result<f64> {
    if svals.is_empty() {
        return Err(Error::domain("need at least one trial parameter"));
    }
    if !s.is_radial() {
        return Err(Error::domain(format!("`{}` is not radial", s.name)));
    }
    let psi = |r: f64| s.psi(Vec2::new(r, 0.0));
    let w = |r: f64| s.weight.eval(Vec2::new(r, 0.0));
    let mut best = f64::NEG_INFINITY;
    for &t in svals {
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::domain(format!("trial parameters must be positive, got {t}")));
        }
        // ‖f‖² = 2π ∫ e^{−2tψ} w ρ dρ;  ∫_E e^{−2tτ} = (2/t) ∫ e^{−4tψ(η)} dη
        let norm_sq = 2.0 * PI * radial_integral(|r| (-2.0 * t * psi(r)).exp() * w(r), |r| 2.0 * t * psi(r))?;
        let support = (4.0 * PI / t) * radial_integral(|r| (-4.0 * t * psi(r)).exp(), |r| 4.0 * t * psi(r))?;
        if !(norm_sq > 0.0 && support > 0.0) {
            return Err(Error::Integrability(format!("degenerate trial integrals at s = {t}")));
        }
        best = best.max(norm_sq * norm_sq / support);
    }
    Ok(best)
}

/// `(p/2π) Γ(2/p)/Γ(1/2+1/p)² ∫_0^{2^{2−2/p}} conv_pp(p, t^{−p/2})² dt`:
/// the ratio `‖f√wν ∗ f√wν‖² / ‖f‖⁴` for `f = e^{−Ψ}|y|^{(p−2)/4}`.
pub fn strichartz_ratio_pp(p: f64, cfg: &NumericConfig) -> Result<QuadResult> {
    if !(p > 2.0) || !p.is_finite() {
        return Err(Error::domain(format!("ratio needs p > 2, got {p}")));
    }
    let top = 2f64.powf(2.0 - 2.0 / p);
    let profile = |t: f64| -> Result<f64> {
        let lam = t.powf(-0.5 * p);
        let v = if p == 4.0 {
            conv_quartic_closed(lam.max(0.125), cfg)?
        } else {
            conv_pp(p, lam.max(support_edge(p)), cfg)?
        };
        Ok(v.value * v.value)
    };
    // λ = 1 is where the level set passes through the origin; λ = 10·2^{1−p}
    // separates the near-edge regime
    let mut breaks = vec![0.0, 1.0, (10.0 * support_edge(p)).powf(-2.0 / p), top];
    breaks.retain(|&t| (0.0..=top).contains(&t));
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let mut total = QuadResult { value: 0.0, error: 0.0, panels: 0 };
    for pair in breaks.windows(2) {
        let part = integrate(profile, pair[0], pair[1], 1e-10, 1e-10, 400)?;
        total.value += part.value;
        total.error += part.error;
        total.panels += part.panels;
    }
    let scale = p / (2.0 * PI) * gamma_fn(2.0 / p)? / gamma_fn(0.5 + 1.0 / p)?.powi(2);
    Ok(QuadResult { value: scale * total.value, error: scale * total.error, panels: total.panels })
}
