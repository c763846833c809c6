//! `verify` subcommands. Each prints its evidence, then fails with exit
//! status 4 if any checked invariant is violated.

use std::f64::consts::PI;

use clap::{Args, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::json;

use sharp_ext_core::convolution::{conv_oracle, conv_weighted, OracleMethod, SpaceTimePoint};
use sharp_ext_core::diagnostics::{cap_interaction_bound, cap_interaction_numeric, comparison_scan};
use sharp_ext_core::geometry::{det_t_prime, solve_lambda, SurfaceKind, SurfaceSpec};
use sharp_ext_core::{Error, NumericConfig, Vec2};

use crate::format::{parse_pair, parse_range, Printer};
use crate::{Failure, SurfaceArgs};

/// Gap allowed for the unperturbed paraboloid, whose density is exactly π/2.
const PARABOLOID_GAP_TOL: f64 = 1e-8;

#[derive(Subcommand, Debug)]
pub enum VerifyCmd {
    /// `π/2 − (σ∗σ)(ξ, 2ψ(ξ/2)+t)` on a grid; must be positive, or zero for
    /// the paraboloid itself.
    Compare {
        #[arg(long, default_value = "quartic-mixed")]
        surface: String,
        /// Range for both ξ components, `start:end:count`.
        #[arg(long, default_value = "-4:4:20", allow_hyphen_values = true)]
        xi: String,
        /// Log-spaced range for t.
        #[arg(long, default_value = "0.1:10:10")]
        t: String,
    },
    /// Sampled cap interaction against its closed-form bound.
    Caps {
        #[arg(long, default_value = "paraboloid")]
        surface: String,
        /// Cap radius; without it random triples are drawn.
        #[arg(long)]
        r: Option<f64>,
        #[arg(long)]
        rho: Option<f64>,
        #[arg(long, default_value = "0,0", allow_hyphen_values = true)]
        y0: String,
        #[command(flatten)]
        draw: Draws,
        /// Rings and points per ring in each cap sample.
        #[arg(long, default_value_t = 12)]
        grid: usize,
    },
    /// `λ ∈ (0, 1]` and `det T′ ∈ (0, 1)` on random draws.
    Contraction {
        /// Defaults to a rotation through strictly convex perturbations.
        #[arg(long, value_delimiter = ';')]
        surface: Vec<String>,
        #[command(flatten)]
        draw: Draws,
    },
    /// Angular formula against the brute-force slab integral.
    Oracle {
        #[command(flatten)]
        surface: SurfaceArgs,
        #[command(flatten)]
        draw: Draws,
        /// Use seeded Monte Carlo instead of the polar grid.
        #[arg(long)]
        monte_carlo: bool,
    },
}

#[derive(Args, Debug, Clone, Copy)]
pub struct Draws {
    #[arg(long)]
    count: Option<usize>,
    #[arg(long, default_value_t = 20_240_601)]
    seed: u64,
}

impl Draws {
    fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }
}

pub fn run(cmd: &VerifyCmd, cfg: &NumericConfig, pr: &mut Printer) -> Result<(), Failure> {
    match cmd {
        VerifyCmd::Compare { surface, xi, t } => compare(surface, xi, t, cfg, pr),
        VerifyCmd::Caps { surface, r, rho, y0, draw, grid } => caps(surface, *r, *rho, y0, *draw, *grid, cfg, pr),
        VerifyCmd::Contraction { surface, draw } => contraction(surface, *draw, cfg, pr),
        VerifyCmd::Oracle { surface, draw, monte_carlo } => oracle(surface, *draw, *monte_carlo, cfg, pr),
    }
}

fn compare(surface: &str, xi: &str, t: &str, cfg: &NumericConfig, pr: &mut Printer) -> Result<(), Failure> {
    let s = SurfaceSpec::from_name(surface)?;
    let axis = parse_range(xi, false).map_err(Failure::Usage)?;
    let ts = parse_range(t, true).map_err(Failure::Usage)?;
    let grid: Vec<Vec2> = axis.iter().flat_map(|&a| axis.iter().map(move |&b| Vec2::new(a, b))).collect();
    let report = comparison_scan(&s, &grid, &ts, cfg)?;
    pr.line("xi1,xi2,t,gap");
    for row in &report.rows {
        let line = format!("{},{},{},{}", pr.num(row.xi.x), pr.num(row.xi.y), pr.num(row.t), pr.num(row.gap));
        pr.line(&line);
    }
    if matches!(s.kind, SurfaceKind::Paraboloid) {
        if report.max_abs_gap > PARABOLOID_GAP_TOL {
            return Err(Failure::Verification(format!(
                "paraboloid gap {} exceeds {PARABOLOID_GAP_TOL}",
                report.max_abs_gap
            )));
        }
    } else if report.nonpositive > 0 {
        let a = report.argmin;
        return Err(Failure::Verification(format!(
            "{} non-positive gaps, minimum {} at ξ=({}, {}), t={}",
            report.nonpositive, a.gap, a.xi.x, a.xi.y, a.t
        )));
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn caps(
    surface: &str,
    r: Option<f64>,
    rho: Option<f64>,
    y0: &str,
    draw: Draws,
    grid: usize,
    cfg: &NumericConfig,
    pr: &mut Printer,
) -> Result<(), Failure> {
    let s = SurfaceSpec::from_name(surface)?;
    let triples: Vec<(f64, f64, Vec2)> = match (r, rho) {
        (Some(r), Some(rho)) => vec![(r, rho, parse_pair(y0).map_err(Failure::Usage)?)],
        (None, None) => {
            let mut rng = draw.rng();
            (0..draw.count.unwrap_or(20))
                .map(|_| {
                    let r = rng.gen_range(0.05..0.5);
                    let rho = 3.0 * r + rng.gen_range(0.05..2.0);
                    let y0 = Vec2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                    (r, rho, y0)
                })
                .collect()
        }
        _ => return Err(Failure::Usage("--r and --rho go together".into())),
    };
    pr.line("y01,y02,r,rho,sup,bound,tolerance,ok");
    let mut failures = 0;
    for (r, rho, y0) in triples {
        let bound = cap_interaction_bound(r, rho)?;
        let rep = cap_interaction_numeric(&s, y0, r, rho, grid, cfg)?;
        let ok = rep.sup <= bound + rep.tolerance;
        failures += usize::from(!ok);
        let line = format!(
            "{},{},{},{},{},{},{},{}",
            pr.num(y0.x),
            pr.num(y0.y),
            pr.num(r),
            pr.num(rho),
            pr.num(rep.sup),
            pr.num(bound),
            pr.num(rep.tolerance),
            ok
        );
        pr.line(&line);
    }
    if failures > 0 {
        return Err(Failure::Verification(format!("{failures} cap triples exceed the bound")));
    }
    Ok(())
}

fn default_contraction_surfaces() -> Vec<SurfaceSpec> {
    vec![
        SurfaceSpec::quartic_mixed(),
        SurfaceSpec::exponential(),
        SurfaceSpec::power_perturbation(1.0, 3.0).expect("valid"),
        SurfaceSpec::power_perturbation(0.5, 6.0).expect("valid"),
    ]
}

fn contraction(names: &[String], draw: Draws, cfg: &NumericConfig, pr: &mut Printer) -> Result<(), Failure> {
    let surfaces = if names.is_empty() {
        default_contraction_surfaces()
    } else {
        names.iter().map(|n| SurfaceSpec::from_name(n)).collect::<Result<Vec<_>, Error>>()?
    };
    for s in &surfaces {
        if !s.phi_strictly_convex() {
            return Err(Failure::Core(Error::Domain(format!(
                "contraction is only certified for strictly convex perturbations; `{}` is not",
                s.name
            ))));
        }
    }
    let mut rng = draw.rng();
    let draws: Vec<(usize, Vec2, Vec2)> = (0..draw.count.unwrap_or(1000))
        .map(|k| {
            let xi = Vec2::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
            let len = 10f64.powf(rng.gen_range(-2.0..0.5));
            let y = len * Vec2::polar(rng.gen_range(0.0..2.0 * PI));
            (k % surfaces.len(), xi, y)
        })
        .collect();
    let results = draws
        .par_iter()
        .map(|&(i, xi, y)| {
            let s = &surfaces[i];
            Ok((solve_lambda(s, xi, y, cfg)?, det_t_prime(s, xi, y, cfg)?))
        })
        .collect::<Result<Vec<(f64, f64)>, Error>>()?;
    let lambda_ok = |l: f64| l > 0.0 && l <= 1.0;
    let det_ok = |d: f64| d > 0.0 && d < 1.0;
    let bad: Vec<usize> = (0..results.len()).filter(|&k| !lambda_ok(results[k].0) || !det_ok(results[k].1)).collect();
    let fold = |f: fn(f64, f64) -> f64, init: f64, pick: fn(&(f64, f64)) -> f64| results.iter().map(pick).fold(init, f);
    pr.json(&json!({
        "draws": results.len(),
        "surfaces": surfaces.iter().map(|s| s.name.clone()).collect::<Vec<_>>(),
        "lambda_min": fold(f64::min, f64::INFINITY, |r| r.0),
        "lambda_max": fold(f64::max, f64::NEG_INFINITY, |r| r.0),
        "det_min": fold(f64::min, f64::INFINITY, |r| r.1),
        "det_max": fold(f64::max, f64::NEG_INFINITY, |r| r.1),
        "violations": bad.len(),
    }));
    if let Some(&k) = bad.first() {
        let (i, xi, y) = draws[k];
        return Err(Failure::Verification(format!(
            "{} draws violate the contraction bounds; first: `{}` ξ=({}, {}) y=({}, {}) λ={} det={}",
            bad.len(),
            surfaces[i].name,
            xi.x,
            xi.y,
            y.x,
            y.y,
            results[k].0,
            results[k].1
        )));
    }
    Ok(())
}

fn oracle(
    surface: &SurfaceArgs,
    draw: Draws,
    monte_carlo: bool,
    cfg: &NumericConfig,
    pr: &mut Printer,
) -> Result<(), Failure> {
    let s = surface.build()?;
    let mut rng = draw.rng();
    let points: Vec<SpaceTimePoint> = (0..draw.count.unwrap_or(30))
        .map(|_| {
            let xi = Vec2::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let t = rng.gen_range(0.2..4.0);
            SpaceTimePoint::new(xi, 2.0 * s.psi(0.5 * xi) + t)
        })
        .collect();
    let method = if monte_carlo { OracleMethod::MonteCarlo { seed: draw.seed } } else { OracleMethod::PolarGrid };
    let w = |y: Vec2| s.weight.eval(y);
    let rows = points
        .par_iter()
        .map(|&p| {
            let v = conv_weighted(&s, w, w, p, cfg)?;
            let o = conv_oracle(&s, w, w, p, cfg, method)?;
            Ok((p, v.value, o, v.err_est))
        })
        .collect::<Result<Vec<_>, Error>>()?;
    pr.line("xi1,xi2,tau,value,oracle,err_est,ok");
    let mut failures = 0;
    for (p, value, o, err) in rows {
        let ok = (value - o).abs() <= (1e-3 * value.abs()).max(3.0 * err);
        failures += usize::from(!ok);
        let line = format!(
            "{},{},{},{},{},{},{}",
            pr.num(p.xi.x),
            pr.num(p.xi.y),
            pr.num(p.tau),
            pr.num(value),
            pr.num(o),
            pr.num(err),
            ok
        );
        pr.line(&line);
    }
    if failures > 0 {
        return Err(Failure::Verification(format!("{failures} points disagree with the oracle")));
    }
    Ok(())
}
