//! Diagnostics for extremizing sequences: concentration ratios of Gaussian
//! trial functions, interaction of distant caps, and comparison scans.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::config::NumericConfig;
use crate::convolution::{comparison_gap, conv_plain, conv_weighted, SpaceTimePoint};
use crate::error::{Error, Result};
use crate::geometry::{Base, SurfaceSpec};
use crate::linalg::Vec2;
use crate::quadrature::gauss_hermite;

/// Gauss–Hermite points per coordinate for the concentration integrals.
pub const HERMITE_ORDER: usize = 12;

/// Node pairs whose combined weight falls below this fraction are skipped.
const PAIR_CUTOFF: f64 = 1e-15;

struct TrialNode {
    y: Vec2,
    psi: f64,
    weight: f64,
}

/// Gauss–Hermite nodes for `∫ e^{−2nγ(y)} h(y) dy`, where
/// `γ(y) = ψ(y) − ψ(y₀) − ⟨∇ψ(y₀), y − y₀⟩`. Coordinates are whitened by
/// `H(ψ)(y₀)` so that the Gaussian part of the weight is `e^{−|u|²}`; the
/// remaining factor is folded into the weights (common constants dropped).
fn trial_nodes(s: &SurfaceSpec, y0: Vec2, n: f64, order: usize) -> Result<Vec<TrialNode>> {
    let h = s.hess_psi(y0);
    // H = L Lᵀ; y − y₀ = L^{−T} u / √n
    let l11 = h.xx.sqrt();
    let l21 = h.xy / l11;
    let l22 = (h.yy - l21 * l21).sqrt();
    if !(l11 > 0.0 && l22 > 0.0) {
        return Err(Error::domain(format!("H(ψ) is not positive definite at {y0:?}")));
    }
    let scale = 1.0 / n.sqrt();
    let to_y = |u: Vec2| y0 + scale * Vec2::new(u.x / l11 - l21 * u.y / (l11 * l22), u.y / l22);
    let (psi0, grad0) = (s.psi(y0), s.grad_psi(y0));
    let (x, w) = gauss_hermite(order);
    let mut nodes = Vec::with_capacity(order * order);
    for (&u1, &w1) in x.iter().zip(&w) {
        for (&u2, &w2) in x.iter().zip(&w) {
            let u = Vec2::new(u1, u2);
            let y = to_y(u);
            let psi = s.psi(y);
            let gamma = psi - psi0 - grad0.dot(y - y0);
            let weight = w1 * w2 * (u.norm_sq() - 2.0 * n * gamma).exp();
            if !weight.is_finite() {
                return Err(Error::Integrability(format!("trial weight overflows at {y:?}")));
            }
            nodes.push(TrialNode { y, psi, weight });
        }
    }
    Ok(nodes)
}

/// `‖f_nσ ∗ f_nσ‖² / ‖f_n‖⁴` for `f_n = e^{−nγ}` concentrating at `y₀`.
///
/// Since `f_n(y) f_n(z)` depends only on `(y+z, ψ(y)+ψ(z))`, the numerator is
/// `∫∫ f_n²(y) f_n²(z) (σ∗σ)(y+z, ψ(y)+ψ(z)) dy dz`.
pub fn concentration_ratio(s: &SurfaceSpec, y0: Vec2, n: f64, cfg: &NumericConfig) -> Result<f64> {
    concentration_ratio_with_order(s, y0, n, HERMITE_ORDER, cfg)
}

pub fn concentration_ratio_with_order(
    s: &SurfaceSpec,
    y0: Vec2,
    n: f64,
    order: usize,
    cfg: &NumericConfig,
) -> Result<f64> {
    if s.base() != Base::ParaboloidPlusPhi {
        return Err(Error::domain("concentration ratio is defined for ψ = |y|² + φ only"));
    }
    if !(n > 0.0) || !n.is_finite() {
        return Err(Error::domain(format!("concentration parameter must be positive, got {n}")));
    }
    let nodes = trial_nodes(s, y0, n, order)?;
    let mass: f64 = nodes.iter().map(|t| t.weight).sum();
    let peak = nodes.iter().map(|t| t.weight).fold(0.0, f64::max);
    let cutoff = PAIR_CUTOFF * peak * peak;
    let rows: Vec<f64> = (0..nodes.len())
        .into_par_iter()
        .map(|k| -> Result<f64> {
            let a = &nodes[k];
            let mut acc = 0.0;
            for (l, b) in nodes.iter().enumerate().skip(k) {
                let w = a.weight * b.weight;
                if w < cutoff {
                    continue;
                }
                let v = conv_plain(s, SpaceTimePoint::new(a.y + b.y, a.psi + b.psi), cfg)?.value;
                acc += if l == k { w * v } else { 2.0 * w * v };
            }
            Ok(acc)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(rows.iter().sum::<f64>() / (mass * mass))
}

/// Least-squares fit of `ratio(n) = L + c/n`; returns `(L, c)`.
pub fn extrapolate(ns: &[f64], ratios: &[f64]) -> Result<(f64, f64)> {
    if ns.len() != ratios.len() || ns.len() < 2 {
        return Err(Error::domain("extrapolation needs at least two (n, ratio) pairs"));
    }
    let m = ns.len() as f64;
    let xs: Vec<f64> = ns.iter().map(|n| 1.0 / n).collect();
    let (sx, sy) = (xs.iter().sum::<f64>(), ratios.iter().sum::<f64>());
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(ratios).map(|(x, y)| x * y).sum();
    let det = m * sxx - sx * sx;
    if det.abs() < 1e-300 {
        return Err(Error::domain("extrapolation needs distinct n values"));
    }
    let c = (m * sxy - sx * sy) / det;
    Ok(((sy - c * sx) / m, c))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConcentrationReport {
    pub y0: [f64; 2],
    pub n_list: Vec<f64>,
    pub ratios: Vec<f64>,
    /// Limit of the `L + c/n` fit.
    pub extrapolated: f64,
    /// `(σ∗σ)` on the boundary at `ξ = 2y₀`.
    pub target_boundary_value: f64,
    pub model: String,
}

pub fn concentration_study(s: &SurfaceSpec, y0: Vec2, ns: &[f64], cfg: &NumericConfig) -> Result<ConcentrationReport> {
    let ratios = ns.iter().map(|&n| concentration_ratio(s, y0, n, cfg)).collect::<Result<Vec<f64>>>()?;
    let (extrapolated, _) = extrapolate(ns, &ratios)?;
    let det = s.hess_psi(y0).det();
    Ok(ConcentrationReport {
        y0: [y0.x, y0.y],
        n_list: ns.to_vec(),
        ratios,
        extrapolated,
        target_boundary_value: PI / det.sqrt(),
        model: "L + c/n".into(),
    })
}

/// `(1/2) arcsin(2r/(ρ−r))`: how strongly a cap of radius `r` interacts with
/// everything at distance at least `ρ` from its centre.
pub fn cap_interaction_bound(r: f64, rho: f64) -> Result<f64> {
    if !(r > 0.0 && rho > 3.0 * r) || !rho.is_finite() {
        return Err(Error::domain(format!("cap bound needs ρ > 3r > 0 (r={r}, ρ={rho})")));
    }
    Ok(0.5 * (2.0 * r / (rho - r)).asin())
}

/// Regions of the parameter plane used as cap indicators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CapSet {
    Ball {
        center: Vec2,
        radius: f64,
    },
    /// Complement of the open ball.
    Outside {
        center: Vec2,
        radius: f64,
    },
}

impl CapSet {
    pub fn contains(&self, y: Vec2) -> bool {
        match *self {
            CapSet::Ball { center, radius } => (y - center).norm_sq() < radius * radius,
            CapSet::Outside { center, radius } => (y - center).norm_sq() >= radius * radius,
        }
    }

    /// Polar sample grid: `grid` rings of `grid` points, plus the centre for
    /// balls. Complements are sampled on the annulus out to 1.5 times the
    /// radius, where the interaction is strongest.
    fn samples(&self, grid: usize) -> Vec<Vec2> {
        let (center, inner, outer) = match *self {
            CapSet::Ball { center, radius } => (center, 0.0, radius),
            CapSet::Outside { center, radius } => (center, radius, 1.5 * radius),
        };
        let mut pts = Vec::with_capacity(grid * grid + 1);
        if matches!(self, CapSet::Ball { .. }) {
            pts.push(center);
        }
        for i in 0..grid {
            let rad = inner + (outer - inner) * (i as f64 + 0.5) / grid as f64;
            for j in 0..grid {
                // stagger rings so that directions are not repeated
                let theta = 2.0 * PI * (j as f64 + 0.5 * (i % 2) as f64) / grid as f64;
                pts.push(center + rad * Vec2::polar(theta));
            }
        }
        pts
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CapReport {
    /// Largest sampled value of `(𝟙_A σ ∗ 𝟙_B σ)`.
    pub sup: f64,
    pub xi: Vec2,
    pub tau: f64,
    /// Trapezoid error allowance for the discontinuous integrand.
    pub tolerance: f64,
}

/// Sampled supremum of `(𝟙_A σ ∗ 𝟙_B σ)` over points `(y+z, ψ(y)+ψ(z))`
/// with `y ∈ A`, `z ∈ B` taken from polar grids.
pub fn pair_interaction_sup(
    s: &SurfaceSpec,
    a: CapSet,
    b: CapSet,
    grid: usize,
    cfg: &NumericConfig,
) -> Result<CapReport> {
    if grid == 0 {
        return Err(Error::domain("grid must be positive"));
    }
    let ya: Vec<Vec2> = a.samples(grid).into_iter().filter(|y| a.contains(*y)).collect();
    let zb: Vec<Vec2> = b.samples(grid).into_iter().filter(|z| b.contains(*z)).collect();
    let pairs: Vec<(Vec2, Vec2)> = ya.iter().flat_map(|&y| zb.iter().map(move |&z| (y, z))).collect();
    let values = pairs
        .par_iter()
        .map(|&(y, z)| {
            let p = SpaceTimePoint::new(y + z, s.psi(y) + s.psi(z));
            let v = conv_weighted(
                s,
                |u| if a.contains(u) { 1.0 } else { 0.0 },
                |u| if b.contains(u) { 1.0 } else { 0.0 },
                p,
                cfg,
            )?;
            Ok((v.value, p))
        })
        .collect::<Result<Vec<(f64, SpaceTimePoint)>>>()?;
    let (sup, at) =
        values
            .into_iter()
            .fold((0.0, SpaceTimePoint::new(Vec2::ZERO, 0.0)), |best, cur| if cur.0 > best.0 { cur } else { best });
    // each jump of the indicator costs at most h times the jump, and the
    // integrand is at most 1/4 when ψ − |y|² is convex
    let tolerance = 2.0 * PI / cfg.angular_nodes as f64;
    Ok(CapReport { sup, xi: at.xi, tau: at.tau, tolerance })
}

/// Sampled `sup (𝟙_{B_r(y₀)}σ ∗ 𝟙_{B_ρ(y₀)ᶜ}σ)`.
pub fn cap_interaction_numeric(
    s: &SurfaceSpec,
    y0: Vec2,
    r: f64,
    rho: f64,
    grid: usize,
    cfg: &NumericConfig,
) -> Result<CapReport> {
    cap_interaction_bound(r, rho)?;
    pair_interaction_sup(
        s,
        CapSet::Ball { center: y0, radius: r },
        CapSet::Outside { center: y0, radius: rho },
        grid,
        cfg,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanRow {
    pub xi: Vec2,
    pub t: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanReport {
    pub rows: Vec<ScanRow>,
    pub min_gap: f64,
    pub argmin: ScanRow,
    pub max_abs_gap: f64,
    /// Rows with `gap ≤ 0`.
    pub nonpositive: usize,
}

/// `ξ` on a 20×20 grid over `[−4, 4]²` and 10 log-spaced `t` in `[0.1, 10]`.
pub fn default_scan_grid() -> (Vec<Vec2>, Vec<f64>) {
    let lin = |k: usize| -4.0 + 8.0 * k as f64 / 19.0;
    let xi = (0..20).flat_map(|i| (0..20).map(move |j| Vec2::new(lin(i), lin(j)))).collect();
    let t = (0..10).map(|k| 10f64.powf(-1.0 + 2.0 * k as f64 / 9.0)).collect();
    (xi, t)
}

/// `comparison_gap` on the product grid, in grid order.
pub fn comparison_scan(s: &SurfaceSpec, xi_grid: &[Vec2], t_grid: &[f64], cfg: &NumericConfig) -> Result<ScanReport> {
    let points: Vec<(Vec2, f64)> = xi_grid.iter().flat_map(|&xi| t_grid.iter().map(move |&t| (xi, t))).collect();
    if points.is_empty() {
        return Err(Error::domain("empty scan grid"));
    }
    let rows = points
        .par_iter()
        .map(|&(xi, t)| Ok(ScanRow { xi, t, gap: comparison_gap(s, xi, t, cfg)? }))
        .collect::<Result<Vec<ScanRow>>>()?;
    let argmin = *rows.iter().min_by(|a, b| a.gap.total_cmp(&b.gap)).expect("non-empty");
    Ok(ScanReport {
        min_gap: argmin.gap,
        argmin,
        max_abs_gap: rows.iter().map(|r| r.gap.abs()).fold(0.0, f64::max),
        nonpositive: rows.iter().filter(|r| !(r.gap > 0.0)).count(),
        rows,
    })
}
