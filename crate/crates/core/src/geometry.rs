//! Convex surfaces `ψ = |y|² + φ` (and pure powers `|y|^p`), the implicit
//! rescaling `λ`, the comparison map `T(y) = λ(y, ξ) y` and its Jacobian.
//!
//! Given `ξ`, `λ(w)` is the unique positive root of
//!
//! ```text
//! ψ(ξ/2 + λw) + ψ(ξ/2 − λw) − 2ψ(ξ/2) = 2|w|²,
//! ```
//!
//! i.e. the factor that moves a point on the paraboloid's ellipsoid
//! `{2|w|² = c}` radially onto the matching level set of `ψ`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::config::NumericConfig;
use crate::error::{Error, Result};
use crate::linalg::{Sym2, Vec2};
use crate::roots::{solve_increasing, MonotoneSolve};

/// Below this `|w|` the implicit solve is replaced by its quadratic limit.
const SMALL_W: f64 = 1e-8;

/// Which graph the surface is.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Base {
    /// `ψ = |y|² + φ(y)`
    ParaboloidPlusPhi,
    /// `Ψ = |y|^p`
    PurePower { p: f64 },
}

/// Built-in surfaces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SurfaceKind {
    /// `φ = 0`
    Paraboloid,
    /// `φ = a|y|^p`, `a > 0`, `p > 2`
    PowerPerturbation { a: f64, p: f64 },
    /// `φ = |y|⁴`
    QuarticMixed,
    /// `Ψ = |y|^p`, `p ≥ 2`
    PurePower { p: f64 },
    /// `φ = e^{y₁} + e^{y₂}`
    Exponential,
    /// `φ = Σ c_k |y|^{2k}` with `c_k ≥ 0`
    Polynomial { terms: Vec<(u32, f64)> },
}

/// Weights `w(y)` attached to a surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Weight {
    One,
    /// `(1 + a|y|²)^{1/2}`
    Quartic {
        a: f64,
    },
    /// `|y|^e`
    Power {
        e: f64,
    },
}

impl Weight {
    pub fn eval(&self, y: Vec2) -> f64 {
        match *self {
            Weight::One => 1.0,
            Weight::Quartic { a } => (1.0 + a * y.norm_sq()).sqrt(),
            Weight::Power { e } => {
                if e == 0.0 {
                    1.0
                } else {
                    y.norm_sq().powf(0.5 * e)
                }
            }
        }
    }

    /// Parse `one`, `quartic:a=<a>` or `power:e=<e>`.
    pub fn parse(text: &str) -> Result<Weight> {
        let (head, params) = split_name(text);
        let params = parse_params(params)?;
        let get = |key: &str| -> Result<f64> {
            params
                .iter()
                .find(|(k, _)| k == key)
                .map(|(_, v)| *v)
                .ok_or_else(|| Error::domain(format!("weight `{text}` needs parameter `{key}`")))
        };
        match head {
            "one" | "1" => Ok(Weight::One),
            "quartic" => {
                let a = get("a")?;
                if !(a >= 0.0) {
                    return Err(Error::domain(format!("quartic weight needs a ≥ 0, got {a}")));
                }
                Ok(Weight::Quartic { a })
            }
            "power" => Ok(Weight::Power { e: get("e")? }),
            other => Err(Error::domain(format!("unknown weight `{other}`"))),
        }
    }
}

impl fmt::Display for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Weight::One => write!(f, "one"),
            Weight::Quartic { a } => write!(f, "quartic:a={a}"),
            Weight::Power { e } => write!(f, "power:e={e}"),
        }
    }
}

/// A surface together with its weight. Immutable once built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceSpec {
    pub name: String,
    pub kind: SurfaceKind,
    pub weight: Weight,
}

/// Output of [`surface_eval`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SurfaceEval {
    pub psi: f64,
    pub grad: Vec2,
    pub hess: Sym2,
    /// The Hessian is singular (pure powers at the origin).
    pub degenerate: bool,
}

/// Terms `c · u^e` with `u = |y|²`, evaluated with their first two
/// `y`-derivatives. Exponents are at least 1, so everything is finite at 0.
fn radial_term(c: f64, e: f64, y: Vec2) -> (f64, Vec2, Sym2) {
    let u = y.norm_sq();
    if u == 0.0 {
        let val = if e == 0.0 { c } else { 0.0 };
        let d1 = if e == 1.0 { c } else { 0.0 };
        return (val, Vec2::ZERO, Sym2::scalar(2.0 * d1));
    }
    let pow = |k: f64| if k.fract() == 0.0 && k.abs() < 64.0 { u.powi(k as i32) } else { u.powf(k) };
    let val = c * pow(e);
    // F'(u) = c e u^{e-1}, F''(u) = c e (e-1) u^{e-2}
    let d1 = c * e * pow(e - 1.0);
    let d2 = c * e * (e - 1.0) * pow(e - 2.0);
    let grad = (2.0 * d1) * y;
    let hess = Sym2::scalar(2.0 * d1) + (4.0 * d2) * Sym2::outer(y);
    (val, grad, hess)
}

/// `F(u₊) + F(u₋) − 2F(u₀)` and `∇F(c+v) − ∇F(c−v)` for `F = k u^e` with a
/// small integer `e`, where `u± = |c ± v|²`. Expanding in `a = |v|²` and
/// `b = 2⟨c, v⟩` leaves only nonnegative terms in the second difference.
fn radial_differences(k: f64, e: f64, c: Vec2, v: Vec2) -> Option<(f64, Vec2)> {
    if e.fract() != 0.0 || !(1.0..=16.0).contains(&e) {
        return None;
    }
    let e = e as u32;
    let (u0, a, b) = (c.norm_sq(), v.norm_sq(), 2.0 * c.dot(v));
    // (a+b)^j ± (a−b)^j, split by the parity of the power of b
    let sym = |j: u32, odd: bool| -> f64 {
        (0..=j)
            .filter(|i| (i % 2 == 1) == odd)
            .map(|i| 2.0 * binomial(j, i) * a.powi((j - i) as i32) * b.powi(i as i32))
            .sum()
    };
    let second: f64 = (1..=e).map(|j| binomial(e, j) * u0.powi((e - j) as i32) * sym(j, false)).sum();
    // F'(u) = k e u^{e−1}
    let d_sum: f64 = (0..e).map(|j| binomial(e - 1, j) * u0.powi((e - 1 - j) as i32) * sym(j, false)).sum();
    let d_diff: f64 = (1..e).map(|j| binomial(e - 1, j) * u0.powi((e - 1 - j) as i32) * sym(j, true)).sum();
    let ke = k * e as f64;
    let grad = (2.0 * ke * d_diff) * c + (2.0 * ke * d_sum) * v;
    Some((k * second, grad))
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

impl SurfaceSpec {
    pub fn new(name: impl Into<String>, kind: SurfaceKind) -> Result<Self> {
        match &kind {
            SurfaceKind::PowerPerturbation { a, p } => {
                if !(*a > 0.0 && *p > 2.0) {
                    return Err(Error::domain(format!("powerpert needs a > 0 and p > 2 (a={a}, p={p})")));
                }
            }
            SurfaceKind::PurePower { p } => {
                if !(*p >= 2.0 && p.is_finite()) {
                    return Err(Error::domain(format!("purepower needs p ≥ 2, got {p}")));
                }
            }
            SurfaceKind::Polynomial { terms } if terms.iter().any(|&(_, c)| !(c >= 0.0) || !c.is_finite()) => {
                return Err(Error::domain("polynomial coefficients must be finite and ≥ 0"));
            }
            _ => {}
        }
        let weight = match kind {
            SurfaceKind::PurePower { p } => Weight::Power { e: 0.5 * (p - 2.0) },
            _ => Weight::One,
        };
        Ok(SurfaceSpec { name: name.into(), kind, weight })
    }

    pub fn paraboloid() -> Self {
        SurfaceSpec { name: "paraboloid".into(), kind: SurfaceKind::Paraboloid, weight: Weight::One }
    }

    pub fn quartic_mixed() -> Self {
        SurfaceSpec { name: "quartic-mixed".into(), kind: SurfaceKind::QuarticMixed, weight: Weight::One }
    }

    pub fn exponential() -> Self {
        SurfaceSpec { name: "exp".into(), kind: SurfaceKind::Exponential, weight: Weight::One }
    }

    pub fn pure_power(p: f64) -> Result<Self> {
        Self::new(format!("purepower:p={p}"), SurfaceKind::PurePower { p })
    }

    pub fn power_perturbation(a: f64, p: f64) -> Result<Self> {
        Self::new(format!("powerpert:a={a},p={p}"), SurfaceKind::PowerPerturbation { a, p })
    }

    pub fn with_weight(mut self, weight: Weight) -> Self {
        self.weight = weight;
        self
    }

    /// Look up a surface by its registry name, e.g. `paraboloid`,
    /// `quartic-mixed`, `exp`, `purepower:p=4`, `powerpert:a=1,p=4`,
    /// `poly:c2=1,c3=0.5`.
    pub fn from_name(text: &str) -> Result<Self> {
        let (head, params) = split_name(text);
        let params = parse_params(params)?;
        let get = |key: &str| -> Result<f64> {
            params
                .iter()
                .find(|(k, _)| k == key)
                .map(|(_, v)| *v)
                .ok_or_else(|| Error::domain(format!("surface `{text}` needs parameter `{key}`")))
        };
        let spec = match head {
            "paraboloid" => Self::paraboloid(),
            "quartic-mixed" | "quartic" => Self::quartic_mixed(),
            "exp" | "exponential" => Self::exponential(),
            "purepower" => Self::pure_power(get("p")?)?,
            "powerpert" => Self::power_perturbation(get("a")?, get("p")?)?,
            "poly" => {
                let mut terms = Vec::new();
                for (k, c) in &params {
                    let power: u32 = k
                        .strip_prefix('c')
                        .and_then(|d| d.parse().ok())
                        .ok_or_else(|| Error::domain(format!("poly keys look like c2, got `{k}`")))?;
                    terms.push((power, *c));
                }
                if terms.is_empty() {
                    return Err(Error::domain("poly surface needs at least one coefficient"));
                }
                terms.sort_by_key(|t| t.0);
                Self::new(text.to_string(), SurfaceKind::Polynomial { terms })?
            }
            other => return Err(Error::domain(format!("unknown surface `{other}`"))),
        };
        Ok(SurfaceSpec { name: text.to_string(), ..spec })
    }

    pub fn base(&self) -> Base {
        match self.kind {
            SurfaceKind::PurePower { p } => Base::PurePower { p },
            _ => Base::ParaboloidPlusPhi,
        }
    }

    pub fn is_radial(&self) -> bool {
        !matches!(self.kind, SurfaceKind::Exponential)
    }

    /// `true` when `φ` is strictly convex on all of ℝ², the hypothesis
    /// under which `0 < det T' < 1` holds.
    pub fn phi_strictly_convex(&self) -> bool {
        match &self.kind {
            SurfaceKind::Paraboloid | SurfaceKind::PurePower { .. } => false,
            SurfaceKind::PowerPerturbation { .. } | SurfaceKind::QuarticMixed | SurfaceKind::Exponential => true,
            SurfaceKind::Polynomial { terms } => terms.iter().any(|&(k, c)| k >= 1 && c > 0.0),
        }
    }

    /// Perturbation `φ` with first and second derivatives. For pure powers
    /// this is `Ψ − |y|²`.
    pub fn phi_all(&self, y: Vec2) -> (f64, Vec2, Sym2) {
        match &self.kind {
            SurfaceKind::Paraboloid => (0.0, Vec2::ZERO, Sym2::default()),
            SurfaceKind::QuarticMixed => radial_term(1.0, 2.0, y),
            SurfaceKind::PowerPerturbation { a, p } => radial_term(*a, 0.5 * p, y),
            SurfaceKind::Polynomial { terms } => {
                let mut acc = (0.0, Vec2::ZERO, Sym2::default());
                for &(k, c) in terms {
                    let (v, g, h) = radial_term(c, k as f64, y);
                    acc = (acc.0 + v, acc.1 + g, acc.2 + h);
                }
                acc
            }
            SurfaceKind::Exponential => {
                let (e1, e2) = (y.x.exp(), y.y.exp());
                (e1 + e2, Vec2::new(e1, e2), Sym2::diag(e1, e2))
            }
            SurfaceKind::PurePower { p } => {
                let (v, g, h) = radial_term(1.0, 0.5 * p, y);
                (v - y.norm_sq(), g - 2.0 * y, h + Sym2::scalar(-2.0))
            }
        }
    }

    pub fn phi(&self, y: Vec2) -> f64 {
        self.phi_all(y).0
    }

    pub fn grad_phi(&self, y: Vec2) -> Vec2 {
        self.phi_all(y).1
    }

    pub fn hess_phi(&self, y: Vec2) -> Sym2 {
        self.phi_all(y).2
    }

    pub fn psi(&self, y: Vec2) -> f64 {
        match self.kind {
            SurfaceKind::PurePower { p } => y.norm_sq().powf(0.5 * p),
            _ => y.norm_sq() + self.phi(y),
        }
    }

    pub fn grad_psi(&self, y: Vec2) -> Vec2 {
        match self.kind {
            SurfaceKind::PurePower { p } => radial_term(1.0, 0.5 * p, y).1,
            _ => 2.0 * y + self.grad_phi(y),
        }
    }

    pub fn hess_psi(&self, y: Vec2) -> Sym2 {
        match self.kind {
            SurfaceKind::PurePower { p } => radial_term(1.0, 0.5 * p, y).2,
            _ => Sym2::scalar(2.0) + self.hess_phi(y),
        }
    }

    /// Exact polynomial differences when every radial term has an integer
    /// exponent.
    fn exact_differences(&self, c: Vec2, v: Vec2) -> Option<(f64, Vec2)> {
        let sum = |terms: &mut dyn Iterator<Item = (f64, f64)>| -> Option<(f64, Vec2)> {
            let mut acc = (0.0, Vec2::ZERO);
            for (k, e) in terms {
                let (sd, gd) = radial_differences(k, e, c, v)?;
                acc = (acc.0 + sd, acc.1 + gd);
            }
            Some(acc)
        };
        let (phi_sd, phi_gd) = match &self.kind {
            SurfaceKind::Paraboloid => (0.0, Vec2::ZERO),
            SurfaceKind::QuarticMixed => sum(&mut std::iter::once((1.0, 2.0)))?,
            SurfaceKind::PowerPerturbation { a, p } => sum(&mut std::iter::once((*a, 0.5 * p)))?,
            SurfaceKind::Polynomial { terms } => sum(&mut terms.iter().map(|&(k, c)| (c, k as f64)))?,
            SurfaceKind::PurePower { p } => return sum(&mut std::iter::once((1.0, 0.5 * p))),
            SurfaceKind::Exponential => return None,
        };
        Some((2.0 * v.norm_sq() + phi_sd, 4.0 * v + phi_gd))
    }

    /// `ψ(c+v) + ψ(c−v) − 2ψ(c)`.
    ///
    /// Polynomial surfaces are expanded exactly; for the others, short
    /// segments use `∫_0^1 (1−t) ⟨v, (H(c+tv) + H(c−tv)) v⟩ dt`, which avoids
    /// subtracting nearly equal values.
    pub fn second_difference(&self, c: Vec2, v: Vec2) -> f64 {
        if let Some((sd, _)) = self.exact_differences(c, v) {
            return sd;
        }
        if self.is_short(c, v) {
            return segment_rule(|t| (1.0 - t) * (self.hess_psi(c + t * v) + self.hess_psi(c - t * v)).quad_form(v));
        }
        match self.kind {
            SurfaceKind::PurePower { .. } => self.psi(c + v) + self.psi(c - v) - 2.0 * self.psi(c),
            _ => 2.0 * v.norm_sq() + (self.phi(c + v) + self.phi(c - v) - 2.0 * self.phi(c)),
        }
    }

    /// `∇ψ(c+v) − ∇ψ(c−v)`, handled like [`Self::second_difference`] with
    /// `∫_0^1 (H(c+tv) + H(c−tv)) v dt` for short segments.
    pub fn gradient_difference(&self, c: Vec2, v: Vec2) -> Vec2 {
        if let Some((_, gd)) = self.exact_differences(c, v) {
            return gd;
        }
        if self.is_short(c, v) {
            let hv = |t: f64| (self.hess_psi(c + t * v) + self.hess_psi(c - t * v)).apply(v);
            return Vec2::new(segment_rule(|t| hv(t).x), segment_rule(|t| hv(t).y));
        }
        match self.kind {
            SurfaceKind::PurePower { .. } => self.grad_psi(c + v) - self.grad_psi(c - v),
            _ => 4.0 * v + (self.grad_phi(c + v) - self.grad_phi(c - v)),
        }
    }

    /// The segment `c ± v` is short compared with its distance to the
    /// origin, where pure powers lose smoothness.
    fn is_short(&self, c: Vec2, v: Vec2) -> bool {
        v.norm_sq() <= SHORT_SEGMENT * SHORT_SEGMENT * c.norm_sq()
    }
}

/// Ratio `|v|/|c|` below which differences are evaluated as integrals.
const SHORT_SEGMENT: f64 = 0.25;

/// 12-point Gauss–Legendre rule on `[0, 1]`.
fn segment_rule(f: impl Fn(f64) -> f64) -> f64 {
    use std::sync::OnceLock;
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    let (x, w) = RULE.get_or_init(|| crate::quadrature::gauss_legendre(12));
    x.iter().zip(w).map(|(x, w)| 0.5 * w * f(0.5 * (x + 1.0))).sum()
}

fn split_name(text: &str) -> (&str, &str) {
    match text.split_once(':') {
        Some((h, rest)) => (h.trim(), rest),
        None => (text.trim(), ""),
    }
}

fn parse_params(text: &str) -> Result<Vec<(String, f64)>> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|kv| {
            let (k, v) = kv.split_once('=').ok_or_else(|| Error::domain(format!("expected key=value, got `{kv}`")))?;
            let v: f64 = v.trim().parse().map_err(|_| Error::domain(format!("cannot parse number in `{kv}`")))?;
            Ok((k.trim().to_string(), v))
        })
        .collect()
}

/// `ψ(y)`, `∇ψ(y)`, `H(ψ)(y)`.
pub fn surface_eval(s: &SurfaceSpec, y: Vec2) -> Result<SurfaceEval> {
    if !y.is_finite() {
        return Err(Error::Evaluation(format!("non-finite point {y:?}")));
    }
    let psi = s.psi(y);
    let grad = s.grad_psi(y);
    let hess = s.hess_psi(y);
    if !psi.is_finite() || !grad.is_finite() || !hess.is_finite() {
        return Err(Error::Evaluation(format!("surface `{}` is not finite at {y:?}", s.name)));
    }
    let degenerate = hess.det() <= 0.0;
    Ok(SurfaceEval { psi, grad, hess, degenerate })
}

/// `g(t) = ψ(ξ/2 − ty) + ψ(ξ/2 + ty) − 2ψ(ξ/2)`.
pub fn g_function(s: &SurfaceSpec, xi: Vec2, y: Vec2, t: f64) -> f64 {
    s.second_difference(0.5 * xi, t * y)
}

/// The rescaling `λ(w, ξ)`; see the module docs.
pub fn solve_lambda(s: &SurfaceSpec, xi: Vec2, w: Vec2, cfg: &NumericConfig) -> Result<f64> {
    let wn = w.norm();
    if wn == 0.0 || !wn.is_finite() {
        return Err(Error::domain("solve_lambda needs a finite nonzero w"));
    }
    let c = 0.5 * xi;
    if wn < SMALL_W && s.base() == Base::ParaboloidPlusPhi {
        let dir = (1.0 / wn) * w;
        let q = s.hess_psi(c).quad_form(dir);
        if !(q > 0.0) {
            return Err(Error::ConvexityViolation(format!("H(ψ)(ξ/2) is not positive along {dir:?}")));
        }
        return Ok((2.0 / q).sqrt());
    }
    let target = 2.0 * w.norm_sq();
    let opts = MonotoneSolve {
        bisect_width: 1e-3,
        residual_tol: cfg.root_tol * target,
        max_iter: cfg.max_iter,
        expand_upper: true,
    };
    let lambda = solve_increasing(
        |l| {
            let v = l * w;
            let g = s.second_difference(c, v);
            let dg = s.gradient_difference(c, v).dot(w);
            Ok((g, dg))
        },
        target,
        0.0,
        1.0,
        opts,
    )?;
    if !(lambda > 0.0) {
        return Err(Error::ConvexityViolation(format!("λ collapsed to {lambda} at w={w:?}")));
    }
    Ok(lambda)
}

/// `T(y) = λ(y, ξ) y`.
pub fn transform_t(s: &SurfaceSpec, xi: Vec2, y: Vec2, cfg: &NumericConfig) -> Result<Vec2> {
    let lambda = solve_lambda(s, xi, y, cfg)?;
    Ok(lambda * y)
}

/// Jacobian determinant of `T` in dimension two with comparison surface
/// `|·|²`:
///
/// ```text
/// det T'(y) = λ · ⟨∇|·|²(ξ/2+y) − ∇|·|²(ξ/2−y), y⟩ / ⟨∇ψ(ξ/2+T y) − ∇ψ(ξ/2−T y), y⟩
///           = 4λ|y|² / ⟨u, y⟩.
/// ```
pub fn det_t_prime(s: &SurfaceSpec, xi: Vec2, y: Vec2, cfg: &NumericConfig) -> Result<f64> {
    let lambda = solve_lambda(s, xi, y, cfg)?;
    let c = 0.5 * xi;
    let ty = lambda * y;
    let numerator = 4.0 * y.norm_sq();
    let denominator = if y.norm() < SMALL_W {
        // ⟨u, y⟩ → 2λ⟨y, H y⟩ as y → 0
        2.0 * lambda * s.hess_psi(c).quad_form(y)
    } else {
        s.gradient_difference(c, ty).dot(y)
    };
    if !(denominator > 0.0) {
        return Err(Error::ConvexityViolation(format!("⟨∇ψ(ξ/2+Ty) − ∇ψ(ξ/2−Ty), y⟩ = {denominator} at y={y:?}")));
    }
    Ok(lambda * numerator / denominator)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg() -> NumericConfig {
        NumericConfig::default()
    }

    fn fd_grad(f: impl Fn(Vec2) -> f64, y: Vec2) -> Vec2 {
        let h = 1e-6 * (1.0 + y.norm());
        Vec2::new(
            (f(y + Vec2::new(h, 0.0)) - f(y - Vec2::new(h, 0.0))) / (2.0 * h),
            (f(y + Vec2::new(0.0, h)) - f(y - Vec2::new(0.0, h))) / (2.0 * h),
        )
    }

    fn rel_close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
    }

    fn registry() -> Vec<SurfaceSpec> {
        vec![
            SurfaceSpec::paraboloid(),
            SurfaceSpec::quartic_mixed(),
            SurfaceSpec::exponential(),
            SurfaceSpec::power_perturbation(0.7, 3.0).unwrap(),
            SurfaceSpec::pure_power(3.0).unwrap(),
            SurfaceSpec::pure_power(4.0).unwrap(),
            SurfaceSpec::from_name("poly:c1=0.5,c3=0.2").unwrap(),
        ]
    }

    #[test]
    fn surface_eval_examples() {
        let e = surface_eval(&SurfaceSpec::paraboloid(), Vec2::new(1.0, 0.0)).unwrap();
        assert_eq!(e.psi, 1.0);
        assert_eq!(e.grad, Vec2::new(2.0, 0.0));
        assert_eq!(e.hess, Sym2::scalar(2.0));

        let e = surface_eval(&SurfaceSpec::quartic_mixed(), Vec2::new(1.0, 0.0)).unwrap();
        assert!((e.psi - 2.0).abs() < 1e-15);
        assert!((e.grad.x - 6.0).abs() < 1e-14 && e.grad.y == 0.0);
        assert!((e.hess.xx - 14.0).abs() < 1e-13 && (e.hess.yy - 6.0).abs() < 1e-13 && e.hess.xy == 0.0);

        let e = surface_eval(&SurfaceSpec::exponential(), Vec2::ZERO).unwrap();
        assert_eq!(e.psi, 2.0);
        assert_eq!(e.grad, Vec2::new(1.0, 1.0));
        assert_eq!(e.hess, Sym2::scalar(3.0));
    }

    #[test]
    fn pure_power_origin_is_flagged_degenerate() {
        let e = surface_eval(&SurfaceSpec::pure_power(4.0).unwrap(), Vec2::ZERO).unwrap();
        assert!(e.degenerate);
        assert_eq!(e.psi, 0.0);
        let e = surface_eval(&SurfaceSpec::pure_power(2.0).unwrap(), Vec2::ZERO).unwrap();
        assert!(!e.degenerate);
    }

    #[test]
    fn non_finite_input_is_an_error() {
        assert!(surface_eval(&SurfaceSpec::paraboloid(), Vec2::new(f64::NAN, 0.0)).is_err());
        assert!(surface_eval(&SurfaceSpec::exponential(), Vec2::new(1e6, 0.0)).is_err());
    }

    #[test]
    fn registry_names() {
        assert_eq!(SurfaceSpec::from_name("purepower:p=4").unwrap().kind, SurfaceKind::PurePower { p: 4.0 });
        assert_eq!(
            SurfaceSpec::from_name("powerpert:a=1,p=4").unwrap().kind,
            SurfaceKind::PowerPerturbation { a: 1.0, p: 4.0 }
        );
        assert_eq!(SurfaceSpec::from_name("purepower:p=4").unwrap().weight, Weight::Power { e: 1.0 });
        assert!(SurfaceSpec::from_name("purepower").is_err());
        assert!(SurfaceSpec::from_name("powerpert:a=1,p=1.5").is_err());
        assert!(SurfaceSpec::from_name("poly:c2=-1").is_err());
        assert!(SurfaceSpec::from_name("torus").is_err());
        assert_eq!(Weight::parse("quartic:a=2").unwrap(), Weight::Quartic { a: 2.0 });
        assert!(Weight::parse("quartic").is_err());
    }

    #[test]
    fn lambda_examples() {
        let c = cfg();
        let l = solve_lambda(&SurfaceSpec::paraboloid(), Vec2::new(0.3, -2.0), Vec2::new(1.5, 0.2), &c).unwrap();
        assert!((l - 1.0).abs() < 1e-14);

        let q = SurfaceSpec::quartic_mixed();
        let exact = ((5f64.sqrt() - 1.0) / 2.0).sqrt();
        let l = solve_lambda(&q, Vec2::ZERO, Vec2::new(0.6, 0.8), &c).unwrap();
        assert!((l - exact).abs() < 1e-13, "{l}");
        assert!((exact - 0.786_151_4).abs() < 1e-7);

        // λ² + λ⁴|w|² = 1 at |w| = 1e-4
        let l = solve_lambda(&q, Vec2::ZERO, Vec2::new(1e-4, 0.0), &c).unwrap();
        // λ² = 2/(1 + √(1 + 4|w|²)), free of cancellation
        let oracle = (2.0 / (1.0 + (1.0 + 4e-8f64).sqrt())).sqrt();
        assert!((l - oracle).abs() < 1e-10 && (l - 1.0).abs() < 1e-7);
    }

    #[test]
    fn lambda_small_w_limit() {
        // At ξ/2 = (1, 0), H(ψ) = diag(14, 6): λ → √(2/14) along e₁.
        let q = SurfaceSpec::quartic_mixed();
        let l = solve_lambda(&q, Vec2::new(2.0, 0.0), Vec2::new(1e-9, 0.0), &cfg()).unwrap();
        assert!((l - (2.0f64 / 14.0).sqrt()).abs() < 1e-12);
        let solved = solve_lambda(&q, Vec2::new(2.0, 0.0), Vec2::new(2e-8, 0.0), &cfg()).unwrap();
        assert!((l - solved).abs() < 1e-6);
    }

    #[test]
    fn lambda_rejects_zero_w() {
        assert!(matches!(
            solve_lambda(&SurfaceSpec::paraboloid(), Vec2::ZERO, Vec2::ZERO, &cfg()),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn transform_examples() {
        let c = cfg();
        let y = Vec2::new(0.4, 1.1);
        assert!((transform_t(&SurfaceSpec::paraboloid(), Vec2::new(1.0, 1.0), y, &c).unwrap() - y).norm() < 1e-14);
        let q = SurfaceSpec::quartic_mixed();
        let l = 0.786_151_377_757_423_3;
        let t1 = transform_t(&q, Vec2::ZERO, Vec2::new(1.0, 0.0), &c).unwrap();
        let t2 = transform_t(&q, Vec2::ZERO, Vec2::new(0.0, 1.0), &c).unwrap();
        assert!((t1 - Vec2::new(l, 0.0)).norm() < 1e-12);
        assert!((t2 - Vec2::new(0.0, l)).norm() < 1e-12);
    }

    #[test]
    fn det_t_prime_examples() {
        let c = cfg();
        let d = det_t_prime(&SurfaceSpec::paraboloid(), Vec2::new(-1.0, 3.0), Vec2::new(0.2, 0.3), &c).unwrap();
        assert!((d - 1.0).abs() < 1e-14);

        // λ h'(1)/g'(λ) with g'(λ) = 4λ + 8λ³, h'(1) = 4  ⇒  1/(1 + 2λ²) = 1/√5
        let q = SurfaceSpec::quartic_mixed();
        let d = det_t_prime(&q, Vec2::ZERO, Vec2::new(1.0, 0.0), &c).unwrap();
        assert!((d - 1.0 / 5f64.sqrt()).abs() < 1e-12, "{d}");

        let d = det_t_prime(&q, Vec2::ZERO, Vec2::new(1e-3, 0.0), &c).unwrap();
        assert!((d - 1.0).abs() < 1e-2);
    }

    /// Central-difference Jacobian of T, independent of the closed formula.
    fn fd_det_t(s: &SurfaceSpec, xi: Vec2, y: Vec2) -> f64 {
        let c = cfg();
        let h = 1e-5 * y.norm();
        let t = |v: Vec2| transform_t(s, xi, v, &c).unwrap();
        let dx = (1.0 / (2.0 * h)) * (t(y + Vec2::new(h, 0.0)) - t(y - Vec2::new(h, 0.0)));
        let dy = (1.0 / (2.0 * h)) * (t(y + Vec2::new(0.0, h)) - t(y - Vec2::new(0.0, h)));
        dx.x * dy.y - dx.y * dy.x
    }

    #[test]
    fn det_t_prime_matches_finite_difference_jacobian() {
        let c = cfg();
        for s in registry() {
            for (xi, y) in [
                (Vec2::ZERO, Vec2::new(0.7, 0.2)),
                (Vec2::new(1.0, -0.5), Vec2::new(-0.3, 0.9)),
                (Vec2::new(-2.0, 0.4), Vec2::new(1.3, 0.1)),
            ] {
                let d = det_t_prime(&s, xi, y, &c).unwrap();
                let fd = fd_det_t(&s, xi, y);
                assert!((d - fd).abs() < 1e-6 * (1.0 + d.abs()), "{}: {d} vs {fd}", s.name);
            }
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let pts = [Vec2::new(0.3, -0.8), Vec2::new(1.2, 0.5), Vec2::new(-0.4, -0.6), Vec2::new(2.0, 1.0)];
        for s in registry() {
            for y in pts {
                let g = s.grad_psi(y);
                let fd = fd_grad(|v| s.psi(v), y);
                assert!(rel_close(g.x, fd.x, 1e-6) && rel_close(g.y, fd.y, 1e-6), "{} grad at {y:?}", s.name);
                let h = s.hess_psi(y);
                let hx = fd_grad(|v| s.grad_psi(v).x, y);
                let hy = fd_grad(|v| s.grad_psi(v).y, y);
                assert!(rel_close(h.xx, hx.x, 1e-5) && rel_close(h.xy, hx.y, 1e-5), "{} hess at {y:?}", s.name);
                assert!(rel_close(h.xy, hy.x, 1e-5) && rel_close(h.yy, hy.y, 1e-5), "{} hess at {y:?}", s.name);
            }
        }
    }

    #[test]
    fn exact_differences_match_direct_evaluation() {
        let c = Vec2::new(0.7, -1.3);
        let v = Vec2::new(0.9, 0.4);
        for s in registry() {
            let direct = s.psi(c + v) + s.psi(c - v) - 2.0 * s.psi(c);
            assert!(rel_close(s.second_difference(c, v), direct, 1e-13), "{}", s.name);
            let gd = s.grad_psi(c + v) - s.grad_psi(c - v);
            let ours = s.gradient_difference(c, v);
            assert!(rel_close(ours.x, gd.x, 1e-13) && rel_close(ours.y, gd.y, 1e-13), "{}", s.name);
            // short segments, where direct evaluation would cancel
            let w = 1e-3 * v;
            let direct = s.psi(c + w) + s.psi(c - w) - 2.0 * s.psi(c);
            assert!(rel_close(s.second_difference(c, w), direct, 1e-8), "{}", s.name);
        }
    }

    fn perturbed() -> impl Strategy<Value = SurfaceSpec> {
        prop_oneof![
            Just(SurfaceSpec::quartic_mixed()),
            Just(SurfaceSpec::exponential()),
            (0.1f64..3.0, 2.2f64..6.0).prop_map(|(a, p)| SurfaceSpec::power_perturbation(a, p).unwrap()),
            Just(SurfaceSpec::from_name("poly:c2=0.3,c3=0.1").unwrap()),
        ]
    }

    fn v2(r: f64) -> impl Strategy<Value = Vec2> {
        (-r..r, -r..r).prop_map(|(x, y)| Vec2::new(x, y))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn phi_nonnegative_and_hessian_positive(s in perturbed(), y in v2(3.0)) {
            prop_assert!(s.phi(y) >= 0.0);
            let (lo, _) = s.hess_psi(y).eigenvalues();
            prop_assert!(lo > 0.0);
        }

        #[test]
        fn lambda_in_unit_interval_and_contraction(s in perturbed(), xi in v2(3.0), y in v2(2.0)) {
            prop_assume!(y.norm() > 1e-6);
            let c = cfg();
            let l = solve_lambda(&s, xi, y, &c).unwrap();
            prop_assert!(l > 0.0 && l <= 1.0 + 1e-15);
            let d = det_t_prime(&s, xi, y, &c).unwrap();
            prop_assert!(d > 0.0 && d < 1.0, "det T' = {}", d);
        }

        #[test]
        fn g_is_increasing_on_positive_axis(s in perturbed(), xi in v2(2.0), y in v2(1.5), t in 0.01f64..2.0) {
            prop_assume!(y.norm() > 1e-3);
            prop_assert_eq!(g_function(&s, xi, y, 0.0), 0.0);
            let g1 = g_function(&s, xi, y, t);
            let g2 = g_function(&s, xi, y, t * 1.1);
            prop_assert!(g1 > 0.0 && g2 > g1);
        }

        #[test]
        fn transform_is_injective_on_rays(s in perturbed(), xi in v2(2.0), y in v2(1.5), t1 in 0.05f64..1.0, k in 1.05f64..3.0) {
            prop_assume!(y.norm() > 1e-3);
            let c = cfg();
            let a = transform_t(&s, xi, t1 * y, &c).unwrap();
            let b = transform_t(&s, xi, (t1 * k) * y, &c).unwrap();
            prop_assert!(a.norm() < b.norm());
            prop_assert!(a.norm() <= (t1 * y).norm() * (1.0 + 1e-15));
            // same direction
            prop_assert!(a.dot(y) > 0.0 && (a.x * y.y - a.y * y.x).abs() <= 1e-12 * a.norm() * y.norm());
        }
    }
}
