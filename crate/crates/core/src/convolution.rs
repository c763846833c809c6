//! The density of `Fσ ∗ Gσ` on a surface `ψ`.
//!
//! For `(ξ, τ)` in the interior of the support `τ > 2ψ(ξ/2)` the density is
//!
//! ```text
//! ∫_{S¹} F(ξ/2+αω) G(ξ/2−αω) / ⟨ω, (∇ψ(ξ/2+αω) − ∇ψ(ξ/2−αω))/α⟩ dω,
//! ```
//!
//! where `α(ω) = R·λ(Rω, ξ)` with `R = √(τ/2 − ψ(ξ/2))` traces the level set
//! `ψ(ξ/2+y) + ψ(ξ/2−y) = τ` in polar form.

use std::f64::consts::PI;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::NumericConfig;
use crate::error::{Error, Result};
use crate::geometry::{solve_lambda, surface_eval, Base, SurfaceSpec};
use crate::linalg::Vec2;
use crate::quadrature::{gauss_legendre, trapezoid_periodic};
use crate::roots::{solve_increasing, MonotoneSolve};

/// Below this `α` the gradient quotient is replaced by its Hessian limit.
const SMALL_ALPHA: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimePoint {
    pub xi: Vec2,
    pub tau: f64,
}

impl SpaceTimePoint {
    pub fn new(xi: Vec2, tau: f64) -> Self {
        SpaceTimePoint { xi, tau }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Region {
    Interior,
    Boundary,
    Outside,
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Region::Interior => "interior",
            Region::Boundary => "boundary",
            Region::Outside => "outside",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvValue {
    pub value: f64,
    pub region: Region,
    /// `|I_N − I_{N/2}|` for the angular rule; zero for closed forms.
    pub err_est: f64,
}

impl ConvValue {
    pub fn exact(value: f64, region: Region) -> Self {
        ConvValue { value, region, err_est: 0.0 }
    }
}

/// Interior, boundary or outside of `{τ ≥ 2ψ(ξ/2)}`, with a relative band
/// of `10⁻¹²(1+|τ|)` counted as boundary.
pub fn classify_point(s: &SurfaceSpec, p: SpaceTimePoint) -> Region {
    let floor = 2.0 * s.psi(0.5 * p.xi);
    let gap = p.tau - floor;
    if gap.abs() <= 1e-12 * (1.0 + p.tau.abs()) {
        Region::Boundary
    } else if gap > 0.0 {
        Region::Interior
    } else {
        Region::Outside
    }
}

/// `π w²(ξ/2) / √det H(ψ)(ξ/2)`, the continuous extension of the weighted
/// density to the boundary of the support.
pub fn conv_boundary(s: &SurfaceSpec, xi: Vec2) -> Result<f64> {
    let c = 0.5 * xi;
    let e = surface_eval(s, c)?;
    let det = e.hess.det();
    if e.degenerate || !(det > 0.0) {
        return Err(Error::domain(format!("H(ψ) is degenerate at ξ/2 = {c:?}")));
    }
    let w = s.weight.eval(c);
    Ok(PI * w * w / det.sqrt())
}

fn interior_radius(s: &SurfaceSpec, p: SpaceTimePoint) -> Result<f64> {
    match classify_point(s, p) {
        Region::Interior => Ok((0.5 * p.tau - s.psi(0.5 * p.xi)).sqrt()),
        region => Err(Error::Region { region: region.to_string() }),
    }
}

/// `F G / quotient` at the angle `ω`.
fn angular_term<F, G>(
    s: &SurfaceSpec,
    f: &F,
    g: &G,
    xi: Vec2,
    radius: f64,
    omega: Vec2,
    cfg: &NumericConfig,
) -> Result<f64>
where
    F: Fn(Vec2) -> f64,
    G: Fn(Vec2) -> f64,
{
    let c = 0.5 * xi;
    let alpha = radius * solve_lambda(s, xi, radius * omega, cfg)?;
    let v = alpha * omega;
    let num = f(c + v) * g(c - v);
    if num == 0.0 {
        return Ok(0.0);
    }
    let quotient = if alpha < SMALL_ALPHA {
        2.0 * s.hess_psi(c).quad_form(omega)
    } else {
        s.gradient_difference(c, v).dot(omega) / alpha
    };
    if !(quotient > 0.0) {
        return Err(Error::ConvexityViolation(format!("angular quotient {quotient} at ω={omega:?}")));
    }
    Ok(num / quotient)
}

/// Density of `Fσ ∗ Gσ` at an interior point via the periodic trapezoid
/// rule on `angular_nodes` nodes; `err_est` compares against half as many.
pub fn conv_weighted<F, G>(s: &SurfaceSpec, f: F, g: G, p: SpaceTimePoint, cfg: &NumericConfig) -> Result<ConvValue>
where
    F: Fn(Vec2) -> f64,
    G: Fn(Vec2) -> f64,
{
    let radius = interior_radius(s, p)?;
    let n = cfg.angular_nodes + cfg.angular_nodes % 2;
    let (value, coarse) =
        trapezoid_periodic(n, |theta| angular_term(s, &f, &g, p.xi, radius, Vec2::polar(theta), cfg))?;
    Ok(ConvValue { value, region: Region::Interior, err_est: (value - coarse).abs() })
}

/// Same density, with the quotient written as the line integral
/// `∫_{-1}^{1} ⟨ω, H(ψ)(ξ/2 + tαω) ω⟩ dt` (Gauss–Legendre in `t`).
pub fn conv_weighted_hessian<F, G>(
    s: &SurfaceSpec,
    f: F,
    g: G,
    p: SpaceTimePoint,
    cfg: &NumericConfig,
) -> Result<ConvValue>
where
    F: Fn(Vec2) -> f64,
    G: Fn(Vec2) -> f64,
{
    let radius = interior_radius(s, p)?;
    let (tn, tw) = gauss_legendre(24);
    let c = 0.5 * p.xi;
    let n = cfg.angular_nodes + cfg.angular_nodes % 2;
    let (value, coarse) = trapezoid_periodic(n, |theta| {
        let omega = Vec2::polar(theta);
        let alpha = radius * solve_lambda(s, p.xi, radius * omega, cfg)?;
        let line: f64 = tn.iter().zip(&tw).map(|(t, w)| w * s.hess_psi(c + (t * alpha) * omega).quad_form(omega)).sum();
        Ok(f(c + alpha * omega) * g(c - alpha * omega) / line)
    })?;
    Ok(ConvValue { value, region: Region::Interior, err_est: (value - coarse).abs() })
}

/// `(wσ ∗ wσ)(ξ, τ)` for the surface's own weight, at any point: zero
/// outside the support and the boundary formula on it.
pub fn conv_eval(s: &SurfaceSpec, p: SpaceTimePoint, cfg: &NumericConfig) -> Result<ConvValue> {
    if !p.xi.is_finite() || !p.tau.is_finite() {
        return Err(Error::domain("space-time point must be finite"));
    }
    match classify_point(s, p) {
        Region::Outside => Ok(ConvValue::exact(0.0, Region::Outside)),
        Region::Boundary => Ok(ConvValue::exact(conv_boundary(s, p.xi)?, Region::Boundary)),
        Region::Interior => {
            let w = s.weight;
            conv_weighted(s, |y| w.eval(y), |y| w.eval(y), p, cfg)
        }
    }
}

/// Unweighted `(σ ∗ σ)(ξ, τ)` at any point.
pub fn conv_plain(s: &SurfaceSpec, p: SpaceTimePoint, cfg: &NumericConfig) -> Result<ConvValue> {
    match classify_point(s, p) {
        Region::Outside => Ok(ConvValue::exact(0.0, Region::Outside)),
        Region::Boundary => {
            let det = surface_eval(s, 0.5 * p.xi)?.hess.det();
            if !(det > 0.0) {
                return Err(Error::domain("degenerate Hessian on the boundary"));
            }
            Ok(ConvValue::exact(PI / det.sqrt(), Region::Boundary))
        }
        Region::Interior => conv_weighted(s, |_| 1.0, |_| 1.0, p, cfg),
    }
}

/// How [`conv_oracle`] integrates the slab.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OracleMethod {
    /// Trapezoid in angle, Gauss–Legendre across the slab in radius.
    PolarGrid,
    /// Uniform sampling of angle and slab radius with a seeded generator.
    MonteCarlo { seed: u64 },
}

/// Radial extent of `{y = ρω : |τ − ψ(ξ/2+y) − ψ(ξ/2−y)| < ε}` along `ω`.
fn slab_interval(
    s: &SurfaceSpec,
    xi: Vec2,
    tau: f64,
    eps: f64,
    omega: Vec2,
    cfg: &NumericConfig,
) -> Result<(f64, f64)> {
    let c = 0.5 * xi;
    let floor = 2.0 * s.psi(c);
    let radius_for = |level: f64| -> Result<f64> {
        let target = level - floor;
        if target <= 0.0 {
            return Ok(0.0);
        }
        let scale = (0.5 * target).sqrt();
        solve_increasing(
            |rho| Ok((s.second_difference(c, rho * omega), s.gradient_difference(c, rho * omega).dot(omega))),
            target,
            0.0,
            scale.max(1e-300),
            MonotoneSolve {
                bisect_width: 1e-3 * scale,
                residual_tol: cfg.root_tol * target,
                max_iter: cfg.max_iter,
                expand_upper: true,
            },
        )
    };
    Ok((radius_for(tau - eps)?, radius_for(tau + eps)?))
}

/// Brute-force estimate `(1/2ε) ∫_{|τ−ψ(ξ/2+y)−ψ(ξ/2−y)|<ε} F(ξ/2+y) G(ξ/2−y) dy`,
/// with `ε = mollify_eps`. It never touches `λ` or the angular quotient, so
/// it is an independent check on [`conv_weighted`].
pub fn conv_oracle<F, G>(
    s: &SurfaceSpec,
    f: F,
    g: G,
    p: SpaceTimePoint,
    cfg: &NumericConfig,
    method: OracleMethod,
) -> Result<f64>
where
    F: Fn(Vec2) -> f64,
    G: Fn(Vec2) -> f64,
{
    let eps = cfg.mollify_eps;
    let c = 0.5 * p.xi;
    let integrand = |y: Vec2| f(c + y) * g(c - y);
    match method {
        OracleMethod::PolarGrid => {
            let (tn, tw) = gauss_legendre(16);
            let n = cfg.angular_nodes + cfg.angular_nodes % 2;
            let (value, _) = trapezoid_periodic(n, |theta| {
                let omega = Vec2::polar(theta);
                let (lo, hi) = slab_interval(s, p.xi, p.tau, eps, omega, cfg)?;
                let (mid, half) = (0.5 * (hi + lo), 0.5 * (hi - lo));
                let radial: f64 = tn
                    .iter()
                    .zip(&tw)
                    .map(|(t, w)| {
                        let rho = mid + half * t;
                        w * rho * integrand(rho * omega)
                    })
                    .sum();
                Ok(half * radial)
            })?;
            Ok(value / (2.0 * eps))
        }
        OracleMethod::MonteCarlo { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut acc = 0.0;
            for _ in 0..cfg.mc_samples {
                let theta = rng.gen_range(0.0..2.0 * PI);
                let omega = Vec2::polar(theta);
                let (lo, hi) = slab_interval(s, p.xi, p.tau, eps, omega, cfg)?;
                let rho = rng.gen_range(lo..=hi);
                acc += 2.0 * PI * (hi - lo) * rho * integrand(rho * omega);
            }
            Ok(acc / cfg.mc_samples as f64 / (2.0 * eps))
        }
    }
}

/// `π/2 − (σ∗σ)(ξ, 2ψ(ξ/2) + t)`: how far the perturbed density sits below
/// the paraboloid's constant value.
pub fn comparison_gap(s: &SurfaceSpec, xi: Vec2, t: f64, cfg: &NumericConfig) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::domain(format!("comparison gap needs t > 0, got {t}")));
    }
    if s.base() != Base::ParaboloidPlusPhi {
        return Err(Error::domain("comparison gap is defined for ψ = |y|² + φ only"));
    }
    let tau = 2.0 * s.psi(0.5 * xi) + t;
    let v = conv_weighted(s, |_| 1.0, |_| 1.0, SpaceTimePoint::new(xi, tau), cfg)?;
    Ok(0.5 * PI - v.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Weight;

    const HALF_PI: f64 = 0.5 * PI;

    fn cfg() -> NumericConfig {
        NumericConfig::default()
    }

    fn quartic_weight(a: f64) -> impl Fn(Vec2) -> f64 {
        move |y| Weight::Quartic { a }.eval(y)
    }

    fn axis_formula(a: f64, tau: f64) -> f64 {
        HALF_PI * (0.5 * a + (1.0 - 0.5 * a) / (2.0 * tau + 1.0).sqrt())
    }

    #[test]
    fn classification_examples() {
        let par = SurfaceSpec::paraboloid();
        let q = SurfaceSpec::quartic_mixed();
        assert_eq!(classify_point(&par, SpaceTimePoint::new(Vec2::ZERO, 1.0)), Region::Interior);
        assert_eq!(classify_point(&q, SpaceTimePoint::new(Vec2::new(2.0, 0.0), 4.0)), Region::Boundary);
        assert_eq!(classify_point(&par, SpaceTimePoint::new(Vec2::new(2.0, 0.0), 1.0)), Region::Outside);
    }

    #[test]
    fn boundary_values() {
        let par = SurfaceSpec::paraboloid();
        assert!((conv_boundary(&par, Vec2::new(3.0, -1.0)).unwrap() - HALF_PI).abs() < 1e-15);
        let q = SurfaceSpec::quartic_mixed();
        assert!((conv_boundary(&q, Vec2::new(2.0, 0.0)).unwrap() - PI / 84f64.sqrt()).abs() < 1e-14);
        for p in [2.5, 3.0, 4.0, 7.0] {
            let s = SurfaceSpec::pure_power(p).unwrap();
            let v = conv_boundary(&s, Vec2::new(0.3, -1.7)).unwrap();
            assert!((v - PI / (p * (p - 1.0).sqrt())).abs() < 1e-12, "p={p}");
        }
        let s = SurfaceSpec::pure_power(4.0).unwrap();
        assert!(conv_boundary(&s, Vec2::ZERO).is_err());
    }

    #[test]
    fn paraboloid_is_constant() {
        let par = SurfaceSpec::paraboloid();
        let v = conv_weighted(&par, |_| 1.0, |_| 1.0, SpaceTimePoint::new(Vec2::ZERO, 1.0), &cfg()).unwrap();
        assert!((v.value - HALF_PI).abs() < 1e-13);
        let v = conv_eval(&par, SpaceTimePoint::new(Vec2::new(-2.0, 5.0), 20.0), &cfg()).unwrap();
        assert!((v.value - HALF_PI).abs() < 1e-13);
    }

    #[test]
    fn non_interior_points_are_rejected() {
        let par = SurfaceSpec::paraboloid();
        let r = conv_weighted(&par, |_| 1.0, |_| 1.0, SpaceTimePoint::new(Vec2::new(2.0, 0.0), 1.0), &cfg());
        assert!(matches!(r, Err(Error::Region { .. })));
        let v = conv_eval(&par, SpaceTimePoint::new(Vec2::new(2.0, 0.0), 1.0), &cfg()).unwrap();
        assert_eq!((v.value, v.region), (0.0, Region::Outside));
    }

    #[test]
    fn quartic_axis_formula() {
        let q = SurfaceSpec::quartic_mixed();
        for a in [0.0, 1.0, 2.0] {
            for tau in [0.1, 1.0, 10.0] {
                let v = conv_weighted(
                    &q,
                    quartic_weight(a),
                    quartic_weight(a),
                    SpaceTimePoint::new(Vec2::ZERO, tau),
                    &cfg(),
                )
                .unwrap();
                assert!((v.value - axis_formula(a, tau)).abs() < 1e-10, "a={a} τ={tau}: {}", v.value);
            }
        }
        assert!((axis_formula(0.0, 1.0) - 0.906_899_7).abs() < 1e-7);
    }

    #[test]
    fn quartic_off_axis_closed_form() {
        // With ∇ψ = 2x + 4|x|²x the quotient is 4(1 + 2(|ξ/2|²+α²) + ⟨ξ,ω⟩²).
        let q = SurfaceSpec::quartic_mixed();
        let c = cfg();
        let xi = Vec2::new(0.8, -1.1);
        let tau = 2.0 * q.psi(0.5 * xi) + 0.7;
        let radius = (0.5 * tau - q.psi(0.5 * xi)).sqrt();
        let (direct, _) = trapezoid_periodic(256, |th| {
            let om = Vec2::polar(th);
            let alpha = radius * solve_lambda(&q, xi, radius * om, &c)?;
            Ok(1.0 / (4.0 * (1.0 + 2.0 * (0.25 * xi.norm_sq() + alpha * alpha) + xi.dot(om).powi(2))))
        })
        .unwrap();
        let v = conv_weighted(&q, |_| 1.0, |_| 1.0, SpaceTimePoint::new(xi, tau), &c).unwrap();
        assert!((v.value - direct).abs() < 1e-13);
    }

    #[test]
    fn gradient_and_hessian_forms_agree() {
        let c = cfg().with_nodes(64);
        for s in [SurfaceSpec::quartic_mixed(), SurfaceSpec::exponential(), SurfaceSpec::pure_power(4.0).unwrap()] {
            let xi = Vec2::new(0.5, 0.25);
            let p = SpaceTimePoint::new(xi, 2.0 * s.psi(0.5 * xi) + 0.8);
            let a = conv_weighted(&s, |_| 1.0, |_| 1.0, p, &c).unwrap().value;
            let b = conv_weighted_hessian(&s, |_| 1.0, |_| 1.0, p, &c).unwrap().value;
            assert!((a - b).abs() < 1e-10 * a, "{}: {a} vs {b}", s.name);
        }
    }

    #[test]
    fn quartic_weight_two_gives_half_pi_on_axis() {
        let q = SurfaceSpec::quartic_mixed();
        let v =
            conv_weighted(&q, quartic_weight(2.0), quartic_weight(2.0), SpaceTimePoint::new(Vec2::ZERO, 3.0), &cfg())
                .unwrap();
        assert!((v.value - HALF_PI).abs() < 1e-12);
    }

    #[test]
    fn interior_values_approach_boundary_value() {
        let q = SurfaceSpec::quartic_mixed();
        let xi = Vec2::new(2.0, 0.0);
        let floor = 2.0 * q.psi(0.5 * xi);
        let v: Vec<f64> = (2..=5)
            .map(|k| conv_eval(&q, SpaceTimePoint::new(xi, floor + 10f64.powi(-k)), &cfg()).unwrap().value)
            .collect();
        // values are linear in the offset, so one Richardson step removes the slope
        let limit = v[3] - (v[2] - v[3]) / 9.0;
        assert!((limit - PI / 84f64.sqrt()).abs() < 1e-6, "{v:?}");
    }

    #[test]
    fn oracle_agrees_with_angular_formula() {
        let c = cfg();
        let par = SurfaceSpec::paraboloid();
        let o = conv_oracle(&par, |_| 1.0, |_| 1.0, SpaceTimePoint::new(Vec2::ZERO, 1.0), &c, OracleMethod::PolarGrid)
            .unwrap();
        assert!((o - HALF_PI).abs() < 1e-2);

        let q = SurfaceSpec::quartic_mixed();
        let p = SpaceTimePoint::new(Vec2::ZERO, 1.0);
        let v = conv_weighted(&q, |_| 1.0, |_| 1.0, p, &c).unwrap();
        let o = conv_oracle(&q, |_| 1.0, |_| 1.0, p, &c, OracleMethod::PolarGrid).unwrap();
        assert!((o - v.value).abs() <= (1e-3f64).max(3.0 * v.err_est), "{o} vs {}", v.value);

        let zero = conv_oracle(&q, |_| 0.0, |_| 1.0, p, &c, OracleMethod::PolarGrid).unwrap();
        assert_eq!(zero, 0.0);
    }

    #[test]
    fn monte_carlo_oracle_is_reproducible() {
        let c = NumericConfig { mc_samples: 20_000, ..cfg() };
        let q = SurfaceSpec::quartic_mixed();
        let p = SpaceTimePoint::new(Vec2::new(0.3, 0.1), 2.0);
        let a = conv_oracle(&q, |_| 1.0, |_| 1.0, p, &c, OracleMethod::MonteCarlo { seed: 7 }).unwrap();
        let b = conv_oracle(&q, |_| 1.0, |_| 1.0, p, &c, OracleMethod::MonteCarlo { seed: 7 }).unwrap();
        assert_eq!(a, b);
        let v = conv_weighted(&q, |_| 1.0, |_| 1.0, p, &c).unwrap().value;
        assert!((a - v).abs() < 0.02 * v, "{a} vs {v}");
    }

    #[test]
    fn comparison_gap_examples() {
        let c = cfg();
        assert!(comparison_gap(&SurfaceSpec::paraboloid(), Vec2::new(1.0, 2.0), 0.3, &c).unwrap().abs() < 1e-12);
        let q = SurfaceSpec::quartic_mixed();
        let gap = comparison_gap(&q, Vec2::ZERO, 1.0, &c).unwrap();
        assert!((gap - (HALF_PI - HALF_PI / 3f64.sqrt())).abs() < 1e-10);
        let gap = comparison_gap(&q, Vec2::new(2.0, 0.0), 0.5, &c).unwrap();
        assert!(gap > 0.0);
        assert!((gap - 1.237_941).abs() < 1e-6, "regression fixture: {gap}");
        assert!(comparison_gap(&SurfaceSpec::pure_power(4.0).unwrap(), Vec2::ZERO, 1.0, &c).is_err());
    }
}
