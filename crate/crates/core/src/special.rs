//! Euler Gamma function.

use crate::error::{Error, Result};

/// `Γ(x)` for finite `x > 0`.
pub fn gamma_fn(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::domain(format!("gamma_fn requires a finite x > 0, got {x}")));
    }
    Ok(statrs::function::gamma::gamma(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    /// Stirling series for ln Γ after shifting the argument up by 30.
    fn gamma_oracle(x: f64) -> f64 {
        let shift = 30.0;
        let z = x + shift;
        // Bernoulli-based coefficients B_{2k}/(2k(2k-1)).
        let coef = [1.0 / 12.0, -1.0 / 360.0, 1.0 / 1260.0, -1.0 / 1680.0, 1.0 / 1188.0, -691.0 / 360360.0];
        let mut series = 0.0;
        let mut zp = z;
        for c in coef {
            series += c / zp;
            zp *= z * z;
        }
        let ln_g = (z - 0.5) * z.ln() - z + 0.5 * (2.0 * PI).ln() + series;
        let mut prod = 1.0;
        for k in 0..30 {
            prod *= x + k as f64;
        }
        ln_g.exp() / prod
    }

    #[test]
    fn classical_values() {
        assert!((gamma_fn(0.5).unwrap() - PI.sqrt()).abs() < 1e-14);
        assert!((gamma_fn(1.0).unwrap() - 1.0).abs() < 1e-14);
        assert!((gamma_fn(5.0).unwrap() - 24.0).abs() < 1e-12);
    }

    #[test]
    fn gamma_three_quarters_matches_oracle() {
        let oracle = gamma_oracle(0.75);
        assert!((oracle - 1.225_416_702_465_177_6).abs() < 1e-13);
        assert!((gamma_fn(0.75).unwrap() - oracle).abs() < 1e-13);
    }

    #[test]
    fn twelve_digits_across_range() {
        for i in 1..400 {
            let x = i as f64 * 0.025;
            let g = gamma_fn(x).unwrap();
            let o = gamma_oracle(x);
            assert!(((g - o) / o).abs() < 1e-12, "x={x} g={g} oracle={o}");
        }
    }

    #[test]
    fn rejects_nonpositive() {
        assert!(gamma_fn(0.0).is_err());
        assert!(gamma_fn(-1.5).is_err());
        assert!(gamma_fn(f64::NAN).is_err());
    }
}
