//! Quadrature rules: periodic trapezoid, Gauss–Legendre, Gauss–Hermite and
//! adaptive Gauss–Kronrod (7/15).

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Trapezoid rule over one period `[0, 2π)` with `n` nodes.
///
/// Returns `(I_n, I_{n/2})`; the coarse value reuses the even nodes, so the
/// difference is a free refinement-based error estimate.
pub fn trapezoid_periodic<F>(n: usize, mut f: F) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    assert!(n >= 2 && n.is_multiple_of(2), "node count must be even");
    let h = 2.0 * PI / n as f64;
    let (mut even, mut odd) = (0.0, 0.0);
    for k in 0..n {
        let v = f(k as f64 * h)?;
        if k % 2 == 0 {
            even += v;
        } else {
            odd += v;
        }
    }
    Ok(((even + odd) * h, even * 2.0 * h))
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, 0.0);
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Gauss–Hermite nodes and weights for `∫ e^{-x²} f(x) dx`.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let pim4 = PI.powf(-0.25);
    let nf = n as f64;
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    let mut z: f64 = 0.0;
    for i in 0..m {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..200 {
            // Orthonormal Hermite recurrence.
            let (mut p1, mut p2) = (pim4, 0.0);
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let dz = p1 / pp;
            z -= dz;
            if dz.abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        w[i] = 2.0 / (pp * pp);
    }
    // Nodes were produced largest first; lay them out ascending.
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..m {
        nodes[i] = -x[i];
        weights[i] = w[i];
        nodes[n - 1 - i] = x[i];
        weights[n - 1 - i] = w[i];
    }
    (nodes, weights)
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] =
    [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub panels: usize,
}

fn gk15<F>(f: &mut F, a: f64, b: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c)?;
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx)? + f(c + dx)?;
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    Ok((kronrod * h, ((kronrod - gauss) * h).abs()))
}

/// Globally adaptive Gauss–Kronrod quadrature on `[a, b]`.
///
/// Stops once the summed error estimate is below
/// `max(abs_tol, rel_tol·|I|)`. Exceeding `max_panels` yields a
/// [`Error::Quadrature`] that reports the worst panel.
pub fn integrate<F>(mut f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64, max_panels: usize) -> Result<QuadResult>
where
    F: FnMut(f64) -> Result<f64>,
{
    if a == b {
        return Ok(QuadResult { value: 0.0, error: 0.0, panels: 0 });
    }
    let (v, e) = gk15(&mut f, a, b)?;
    let mut panels = vec![(a, b, v, e)];
    loop {
        let value: f64 = panels.iter().map(|p| p.2).sum();
        let error: f64 = panels.iter().map(|p| p.3).sum();
        if !value.is_finite() {
            return Err(Error::Quadrature(format!("non-finite integral on [{a}, {b}]")));
        }
        if error <= abs_tol.max(rel_tol * value.abs()) {
            return Ok(QuadResult { value, error, panels: panels.len() });
        }
        let (idx, worst) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .map(|(i, p)| (i, *p))
            .expect("non-empty panel list");
        if panels.len() >= max_panels {
            return Err(Error::Quadrature(format!(
                "{} panels exhausted: total error {:e}, worst panel [{}, {}] error {:e}",
                panels.len(),
                error,
                worst.0,
                worst.1,
                worst.3
            )));
        }
        let mid = 0.5 * (worst.0 + worst.1);
        let (lv, le) = gk15(&mut f, worst.0, mid)?;
        let (rv, re) = gk15(&mut f, mid, worst.1)?;
        panels[idx] = (worst.0, mid, lv, le);
        panels.push((mid, worst.1, rv, re));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(8);
        // degree 14 is within the 2n-1 = 15 exactness range
        let approx: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(14)).sum();
        assert!((approx - 2.0 / 15.0).abs() < 1e-14);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn hermite_moments() {
        for n in [1, 2, 5, 20, 40] {
            let (x, w) = gauss_hermite(n);
            let m0: f64 = w.iter().sum();
            assert!((m0 - PI.sqrt()).abs() < 1e-12, "n={n} m0={m0}");
            if n >= 2 {
                let m2: f64 = x.iter().zip(&w).map(|(x, w)| w * x * x).sum();
                assert!((m2 - 0.5 * PI.sqrt()).abs() < 1e-12);
            }
            assert!(x.windows(2).all(|p| p[0] < p[1]));
        }
    }

    #[test]
    fn trapezoid_is_spectral_for_periodic_integrands() {
        let (v, coarse) = trapezoid_periodic(64, |t| Ok(1.0 / (2.0 + t.cos()))).unwrap();
        let exact = 2.0 * PI / 3f64.sqrt();
        assert!((v - exact).abs() < 1e-13);
        assert!((coarse - exact).abs() < 1e-8);
    }

    #[test]
    fn adaptive_handles_endpoint_sqrt() {
        let r = integrate(|x: f64| Ok(x.sqrt()), 0.0, 1.0, 1e-12, 1e-12, 500).unwrap();
        assert!((r.value - 2.0 / 3.0).abs() < 1e-11);
    }

    #[test]
    fn adaptive_reports_exhaustion() {
        let r = integrate(|x: f64| Ok(1.0 / x.abs().max(1e-300)), -1.0, 1.0, 1e-12, 0.0, 20);
        assert!(matches!(r, Err(Error::Quadrature(_))));
    }
}
