//! The pure power `Ψ(y) = |y|^p` with weight `|y|^{(p−2)/2}`.
//!
//! The weighted convolution is homogeneous of degree zero, so off the
//! vertical axis it is a function of `λ = τ/|ξ|^p` alone. Writing points of
//! the level set as `ξ/2 + |ξ|/2 · r ω_θ` with `θ` the angle to `ξ`, the
//! level condition becomes `φ_θ(r) = 2^p λ − 2` where
//!
//! ```text
//! φ_θ(r) = (r² + 1 + 2r cos θ)^{p/2} + (r² + 1 − 2r cos θ)^{p/2} − 2.
//! ```

use std::f64::consts::PI;

use crate::config::NumericConfig;
use crate::convolution::{ConvValue, Region};
use crate::error::{Error, Result};
use crate::roots::{solve_increasing, MonotoneSolve};

/// Profiles closer than this to the support edge use the boundary value.
const EDGE_DELTA: f64 = 1e-10;
/// Below this `r` the quotient `r/φ'_θ(r)` is replaced by `1/φ''_θ(0)`.
const SMALL_R: f64 = 1e-6;

fn check_p(p: f64) -> Result<()> {
    if p >= 2.0 && p.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("pure powers need p ≥ 2, got {p}")))
    }
}

/// `(1+x)^k − 1` without cancellation.
fn pow1p_m1(x: f64, k: f64) -> f64 {
    (k * x.ln_1p()).exp_m1()
}

/// Lower edge `2^{1−p}` of the profile's support.
pub fn support_edge(p: f64) -> f64 {
    2f64.powf(1.0 - p)
}

/// `π/(p√(p−1))`, the profile on the edge of the support.
pub fn boundary_value(p: f64) -> f64 {
    PI / (p * (p - 1.0).sqrt())
}

pub fn phi_theta(p: f64, theta: f64, r: f64) -> f64 {
    let (c, r2) = (theta.cos(), r * r);
    pow1p_m1(r2 + 2.0 * r * c, 0.5 * p) + pow1p_m1(r2 - 2.0 * r * c, 0.5 * p)
}

/// `p r (A^q + B^q) + p cos θ (A^q − B^q)` with `A, B = r² + 1 ± 2r cos θ`
/// and `q = (p−2)/2`.
pub fn phi_theta_prime(p: f64, theta: f64, r: f64) -> f64 {
    let c = theta.cos();
    let q = 0.5 * (p - 2.0);
    let a = r * r + 1.0 + 2.0 * r * c;
    let b = r * r + 1.0 - 2.0 * r * c;
    let (aq, bq) = (a.max(0.0).powf(q), b.max(0.0).powf(q));
    let diff = if b > 0.0 { bq * pow1p_m1(4.0 * r * c / b, q) } else { aq - bq };
    p * r * (aq + bq) + p * c * diff
}

/// `φ''_θ(0) = 2p(1 + (p−2)cos²θ)`.
pub fn phi_theta_second_at_zero(p: f64, theta: f64) -> f64 {
    let c = theta.cos();
    2.0 * p * (1.0 + (p - 2.0) * c * c)
}

/// The `r ≥ 0` with `φ_θ(r) = s`.
pub fn invert_phi_theta(p: f64, theta: f64, s: f64, cfg: &NumericConfig) -> Result<f64> {
    check_p(p)?;
    if !(s >= 0.0) {
        return Err(Error::domain(format!("φ_θ takes values in [0, ∞), got {s}")));
    }
    if s == 0.0 {
        return Ok(0.0);
    }
    // quadratic behaviour near 0 and `2r^p` growth give a bracket to start from
    let guess = (2.0 * s / phi_theta_second_at_zero(p, theta)).sqrt().max((0.5 * s).powf(1.0 / p));
    let hi = 2.0 * guess;
    solve_increasing(
        |r| Ok((phi_theta(p, theta, r), phi_theta_prime(p, theta, r))),
        s,
        0.0,
        hi,
        MonotoneSolve {
            bisect_width: 1e-3 * hi,
            residual_tol: cfg.root_tol * s,
            max_iter: cfg.max_iter,
            expand_upper: true,
        },
    )
}

fn quotient(p: f64, theta: f64, r: f64) -> f64 {
    if r < SMALL_R {
        1.0 / phi_theta_second_at_zero(p, theta)
    } else {
        r / phi_theta_prime(p, theta, r)
    }
}

/// `((r²+1)² − 4r²cos²θ)^{(p−2)/4} · r/φ'_θ(r)` at the level `φ_θ(r) = s`.
fn integrand_at_level(p: f64, theta: f64, s: f64, cfg: &NumericConfig) -> Result<f64> {
    let r = invert_phi_theta(p, theta, s, cfg)?;
    let c = theta.cos();
    let a = r * r + 1.0 + 2.0 * r * c;
    let b = r * r + 1.0 - 2.0 * r * c;
    let weight = (a * b).max(0.0).powf(0.25 * (p - 2.0));
    Ok(weight * quotient(p, theta, r))
}

/// `2^p λ − 2`, computed from the offset to the support edge.
fn level(p: f64, lam: f64) -> f64 {
    2f64.powf(p) * (lam - support_edge(p))
}

/// The profile integrand at angle `θ`; it never exceeds `1/(2p)`.
pub fn pp_integrand(p: f64, theta: f64, lam: f64, cfg: &NumericConfig) -> Result<f64> {
    check_p(p)?;
    let s = level(p, lam);
    if s < 0.0 {
        return Err(Error::Region { region: Region::Outside.to_string() });
    }
    integrand_at_level(p, theta, s, cfg)
}

/// Trapezoid over `[0, 2π)` for integrands depending on `cos²θ` only,
/// folded onto `[0, π/2]`. Returns the value and the half-resolution value.
fn quarter_trapezoid<F>(nodes: usize, f: F) -> Result<(f64, f64)>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    let m = {
        let m = nodes.div_ceil(4).max(4);
        m + m % 2
    };
    let h = 0.5 * PI / m as f64;
    let values = (0..=m).map(|k| f(k as f64 * h)).collect::<Result<Vec<f64>>>()?;
    let sum = |stride: usize| -> f64 {
        let inner: f64 = values.iter().step_by(stride).sum();
        let ends = 0.5 * (values[0] + values[m]);
        4.0 * (inner - ends) * h * stride as f64
    };
    Ok((sum(1), sum(2)))
}

/// `(wν_p ∗ wν_p)(ξ, λ|ξ|^p)` for any `ξ ≠ 0`.
pub fn conv_pp(p: f64, lam: f64, cfg: &NumericConfig) -> Result<ConvValue> {
    check_p(p)?;
    if !lam.is_finite() {
        return Err(Error::domain(format!("λ must be finite, got {lam}")));
    }
    let edge = support_edge(p);
    let delta = lam - edge;
    if delta < -1e-15 * edge {
        return Ok(ConvValue::exact(0.0, Region::Outside));
    }
    if delta < EDGE_DELTA {
        return Ok(ConvValue::exact(boundary_value(p), Region::Boundary));
    }
    let s = level(p, lam);
    let (value, coarse) = quarter_trapezoid(cfg.angular_nodes, |theta| integrand_at_level(p, theta, s, cfg))?;
    Ok(ConvValue { value, region: Region::Interior, err_est: (value - coarse).abs() })
}

/// Closed form for `p = 4`:
///
/// ```text
/// (1/(4√2)) ∫_0^{2π} √((λ + c² + 2c⁴ − 2c²√(2λ + c² + c⁴)) / (2λ + c² + c⁴)) dθ,   c = cos θ,
/// ```
///
/// which needs no root solve.
pub fn conv_quartic_closed(lam: f64, cfg: &NumericConfig) -> Result<ConvValue> {
    if !(lam >= 0.125) || !lam.is_finite() {
        return Err(Error::domain(format!("quartic closed form needs λ ≥ 1/8, got {lam}")));
    }
    let scale = 0.25 / 2f64.sqrt();
    let (value, coarse) = quarter_trapezoid(cfg.angular_nodes, |theta| {
        let c2 = theta.cos().powi(2);
        let den = 2.0 * lam + c2 + c2 * c2;
        let num = lam + c2 + 2.0 * c2 * c2 - 2.0 * c2 * den.sqrt();
        Ok(scale * (num.max(0.0) / den).sqrt())
    })?;
    Ok(ConvValue { value, region: Region::Interior, err_est: (value - coarse).abs() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn cfg() -> NumericConfig {
        NumericConfig::default()
    }

    #[test]
    fn phi_theta_examples() {
        for (theta, r) in [(0.3, 0.7), (1.2, 2.5), (2.9, 0.01)] {
            assert!((phi_theta(2.0, theta, r) - 2.0 * r * r).abs() < 1e-13);
            assert!((phi_theta_prime(2.0, theta, r) - 4.0 * r).abs() < 1e-13);
        }
        assert!((phi_theta(4.0, FRAC_PI_2, 1.0) - 6.0).abs() < 1e-13);
        assert!((phi_theta_prime(4.0, FRAC_PI_2, 1.0) - 16.0).abs() < 1e-13);
        for p in [2.5, 3.0, 6.0] {
            assert_eq!(phi_theta(p, 0.4, 0.0), 0.0);
            assert_eq!(phi_theta_prime(p, 0.4, 0.0), 0.0);
        }
    }

    #[test]
    fn derivative_matches_finite_differences() {
        for p in [2.5, 3.0, 4.0, 5.5] {
            for theta in [0.0, 0.4, 1.3, 2.2] {
                for r in [0.05, 0.6, 1.7, 4.0] {
                    let h = 1e-6 * r;
                    let fd = (phi_theta(p, theta, r + h) - phi_theta(p, theta, r - h)) / (2.0 * h);
                    let d = phi_theta_prime(p, theta, r);
                    assert!((d - fd).abs() < 1e-6 * d.abs(), "p={p} θ={theta} r={r}: {d} vs {fd}");
                }
            }
        }
    }

    #[test]
    fn phi_theta_is_convex_increasing() {
        for p in [2.5, 4.0, 7.0] {
            for theta in [0.0, 0.7, FRAC_PI_2] {
                let vals: Vec<f64> = (0..200).map(|k| phi_theta(p, theta, k as f64 * 0.02)).collect();
                assert!(vals.windows(2).all(|w| w[1] > w[0]));
                assert!(vals.windows(3).all(|w| w[2] - 2.0 * w[1] + w[0] >= -1e-12));
            }
        }
    }

    #[test]
    fn inversion_examples() {
        let c = cfg();
        assert_eq!(invert_phi_theta(4.0, 0.3, 0.0, &c).unwrap(), 0.0);
        let r = invert_phi_theta(4.0, FRAC_PI_2, 14.0, &c).unwrap();
        assert!((r - (2.0 * 2f64.sqrt() - 1.0).sqrt()).abs() < 1e-13);
        assert!((r - 1.352_193_4).abs() < 1e-7);
        for s in [1e-9, 0.3, 50.0] {
            let r = invert_phi_theta(2.0, 1.0, s, &c).unwrap();
            assert!((r - (0.5 * s).sqrt()).abs() < 1e-12 * (1.0 + r));
        }
        for p in [2.5, 3.0, 6.0] {
            for theta in [0.0, 0.9, 2.0] {
                for s in [1e-8, 0.5, 1e3] {
                    let r = invert_phi_theta(p, theta, s, &c).unwrap();
                    assert!((phi_theta(p, theta, r) - s).abs() <= 1e-10 * s, "p={p} θ={theta} s={s}");
                }
            }
        }
    }

    #[test]
    fn edge_and_outside() {
        let c = cfg();
        for p in [2.5, 3.0, 4.0, 6.0] {
            let v = conv_pp(p, support_edge(p), &c).unwrap();
            assert_eq!(v.region, Region::Boundary);
            assert!((v.value - boundary_value(p)).abs() < 1e-15);
            let v = conv_pp(p, 0.9 * support_edge(p), &c).unwrap();
            assert_eq!((v.value, v.region), (0.0, Region::Outside));
        }
        assert!((conv_pp(4.0, 0.125, &c).unwrap().value - PI / (4.0 * 3f64.sqrt())).abs() < 1e-15);
    }

    #[test]
    fn interior_values_join_the_edge_continuously() {
        let c = cfg();
        for p in [2.5, 3.0, 4.0, 6.0] {
            let v = conv_pp(p, support_edge(p) * (1.0 + 1e-8), &c).unwrap();
            assert_eq!(v.region, Region::Interior);
            assert!((v.value - boundary_value(p)).abs() < 1e-5, "p={p}: {}", v.value);
        }
    }

    #[test]
    fn quadratic_profile_is_flat() {
        for lam in [0.6, 1.0, 40.0] {
            assert!((conv_pp(2.0, lam, &cfg()).unwrap().value - FRAC_PI_2).abs() < 1e-13);
        }
    }

    #[test]
    fn profile_stays_below_axis_value() {
        let c = cfg();
        for p in [2.5, 3.0, 4.0, 6.0] {
            for k in 0..30 {
                let lam = support_edge(p) * 10f64.powf(0.2 * k as f64 + 0.01);
                let v = conv_pp(p, lam, &c).unwrap().value;
                assert!(v > 0.0 && v < PI / p, "p={p} λ={lam}: {v}");
            }
        }
    }

    #[test]
    fn profile_dips_below_its_edge_value() {
        // not monotone: the minimum sits strictly inside the support
        let c = cfg();
        for (p, lam) in [(2.5, 0.9), (3.0, 0.87), (4.0, 0.7), (6.0, 0.44)] {
            let v = conv_pp(p, lam, &c).unwrap().value;
            assert!(v < boundary_value(p) - 1e-2, "p={p}: {v}");
        }
        let closed = conv_quartic_closed(0.7, &c).unwrap().value;
        assert!(closed < PI / (4.0 * 3f64.sqrt()) - 0.05);
    }

    #[test]
    fn integrand_is_bounded_by_one_over_2p() {
        let c = cfg();
        for p in [2.5, 3.0, 4.0, 6.0] {
            for lam in [1.001, 1.5, 3.0, 20.0, 1e5].map(|k| k * support_edge(p)) {
                for k in 0..=32 {
                    let theta = k as f64 * FRAC_PI_2 / 32.0;
                    let v = pp_integrand(p, theta, lam, &c).unwrap();
                    assert!(v <= 0.5 / p + 1e-12, "p={p} λ={lam} θ={theta}: {v}");
                }
            }
        }
    }

    #[test]
    fn quartic_closed_form_endpoints_and_agreement() {
        let c = cfg();
        assert!((conv_quartic_closed(0.125, &c).unwrap().value - PI / (4.0 * 3f64.sqrt())).abs() < 1e-12);
        assert!((conv_quartic_closed(1e12, &c).unwrap().value - PI / 4.0).abs() < 1e-5);
        let a = conv_quartic_closed(1.0, &c).unwrap().value;
        let b = conv_pp(4.0, 1.0, &c).unwrap().value;
        assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        assert!(conv_quartic_closed(0.1, &c).is_err());
    }
}
