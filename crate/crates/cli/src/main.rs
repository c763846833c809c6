//! `sharpext`: evaluate convolution densities, bounds and ratios from the
//! command line, and run the numerical verification scans.

mod format;
mod verify;

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use sharp_ext_core::bounds::{
    crossover_p0, pp_bounds, quartic_bounds, strichartz_ratio_pp, BoundsReport, PROV_BOUNDARY, PROV_CURVE, PROV_EXACT,
    PROV_GAMMA,
};
use sharp_ext_core::convolution::{conv_eval, SpaceTimePoint};
use sharp_ext_core::diagnostics::concentration_study;
use sharp_ext_core::geometry::{SurfaceSpec, Weight};
use sharp_ext_core::purepower::conv_pp;
use sharp_ext_core::{Error, NumericConfig, Vec2};

use crate::format::{parse_pair, parse_range, Printer};

const EXIT_DOMAIN: u8 = 2;
const EXIT_NUMERIC: u8 = 3;
const EXIT_VERIFY: u8 = 4;
const EXIT_USAGE: u8 = 64;

#[derive(Parser, Debug)]
#[command(name = "sharpext", version, about = "Convolution densities and sharp extension constants")]
struct Cli {
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Significant digits for printed numbers.
    #[arg(long, global = true, default_value_t = 7)]
    digits: usize,
    /// Flat `key = value` file with numeric settings.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Angular quadrature nodes (overrides the config file).
    #[arg(long, global = true)]
    nodes: Option<usize>,
    #[arg(long, global = true)]
    root_tol: Option<f64>,
    #[arg(long, global = true)]
    max_iter: Option<usize>,
    /// Slab half-width for the mollified oracle.
    #[arg(long, global = true)]
    eps: Option<f64>,
    #[arg(long, global = true)]
    mc_samples: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Convolution density of a surface with itself.
    #[command(subcommand)]
    Conv(ConvCmd),
    /// Pure-power profiles.
    #[command(subcommand)]
    Pp(PpCmd),
    /// Bounds for optimal constants.
    #[command(subcommand)]
    Bounds(BoundsCmd),
    /// Strichartz ratio for pure powers, or concentration ratios.
    Ratio(RatioArgs),
    /// Exponent where the gamma bound meets the boundary bound.
    Crossover {
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
    },
    /// Numerical checks; exit status 4 when one fails.
    #[command(subcommand)]
    Verify(verify::VerifyCmd),
}

#[derive(Args, Debug, Clone)]
pub struct SurfaceArgs {
    /// Registry name, e.g. `quartic-mixed` or `purepower:p=4`.
    #[arg(long, default_value = "paraboloid")]
    surface: String,
    /// Weight override: `one`, `quartic:a=<a>` or `power:e=<e>`.
    #[arg(long)]
    weight: Option<String>,
}

impl SurfaceArgs {
    pub fn build(&self) -> Result<SurfaceSpec, Error> {
        let s = SurfaceSpec::from_name(&self.surface)?;
        Ok(match &self.weight {
            Some(w) => s.with_weight(Weight::parse(w)?),
            None => s,
        })
    }
}

#[derive(Subcommand, Debug)]
enum ConvCmd {
    /// One point; prints a JSON object.
    Eval {
        #[command(flatten)]
        surface: SurfaceArgs,
        /// `x,y`
        #[arg(long, allow_hyphen_values = true)]
        xi: String,
        #[arg(long, allow_hyphen_values = true)]
        tau: f64,
    },
    /// Product grid; prints CSV.
    Grid {
        #[command(flatten)]
        surface: SurfaceArgs,
        /// `start:end:count`
        #[arg(long, allow_hyphen_values = true)]
        xi1: String,
        #[arg(long, allow_hyphen_values = true)]
        xi2: String,
        /// `start:end:count`; offsets above the support floor with `--relative`.
        #[arg(long, allow_hyphen_values = true)]
        tau: String,
        #[arg(long)]
        relative: bool,
    },
}

#[derive(Subcommand, Debug)]
enum PpCmd {
    /// `λ ↦ (wν_p ∗ wν_p)(ξ, λ|ξ|^p)` on a log-spaced grid.
    Profile {
        #[arg(long)]
        p: f64,
        /// Smallest λ; defaults to the support edge `2^{1−p}`.
        #[arg(long)]
        lambda_min: Option<f64>,
        #[arg(long, default_value_t = 1e4)]
        lambda_max: f64,
        #[arg(long, default_value_t = 50)]
        count: usize,
    },
}

#[derive(Subcommand, Debug)]
enum BoundsCmd {
    /// `ψ = |y|² + |y|⁴` with weight `(1 + a|y|²)^{1/2}`.
    Quartic {
        /// One value or a comma list.
        #[arg(long, value_delimiter = ',')]
        a: Vec<f64>,
        #[arg(long)]
        csv: bool,
    },
    /// `Ψ = |y|^p` with weight `|y|^{(p−2)/2}`.
    Purepower {
        #[arg(long, value_delimiter = ',')]
        p: Vec<f64>,
        #[arg(long)]
        csv: bool,
    },
}

#[derive(Args, Debug)]
#[command(args_conflicts_with_subcommands = true)]
struct RatioArgs {
    #[command(subcommand)]
    sub: Option<RatioCmd>,
    #[arg(long)]
    p: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum RatioCmd {
    /// Concentration ratios of `e^{−nγ}` at `y₀` and their `n → ∞` limit.
    Concentration {
        #[command(flatten)]
        surface: SurfaceArgs,
        #[arg(long, default_value = "0,0", allow_hyphen_values = true)]
        y0: String,
        #[arg(long, value_delimiter = ',', default_value = "16,32,64")]
        n: Vec<f64>,
    },
}

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Core(Error),
    Io(String),
    Verification(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Core(e) if e.is_domain() => EXIT_DOMAIN,
            Failure::Core(_) => EXIT_NUMERIC,
            Failure::Io(_) => EXIT_DOMAIN,
            Failure::Verification(_) => EXIT_VERIFY,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(m) | Failure::Io(m) => f.write_str(m),
            Failure::Core(e) => write!(f, "{e}"),
            Failure::Verification(m) => write!(f, "verification failed: {m}"),
        }
    }
}

fn numeric_config(cli: &Cli) -> Result<NumericConfig, Failure> {
    let mut cfg = NumericConfig::default();
    if let Some(path) = &cli.config {
        let text = fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
        cfg = cfg.apply_text(&text)?;
    }
    if let Some(v) = cli.nodes {
        cfg.angular_nodes = v;
    }
    if let Some(v) = cli.root_tol {
        cfg.root_tol = v;
    }
    if let Some(v) = cli.max_iter {
        cfg.max_iter = v;
    }
    if let Some(v) = cli.eps {
        cfg.mollify_eps = v;
    }
    if let Some(v) = cli.mc_samples {
        cfg.mc_samples = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn bounds_row(key: f64, kind: &str, b: &BoundsReport, pr: &Printer) -> String {
    let cell = |v: Option<f64>| v.map(|x| pr.num(x)).unwrap_or_default();
    let boundary = b.lower_by(PROV_BOUNDARY).or_else(|| b.lower_by(PROV_EXACT));
    [
        pr.num(key),
        kind.to_string(),
        cell(boundary),
        cell(b.lower_by(PROV_GAMMA)),
        cell(b.lower_by(PROV_CURVE)),
        pr.num(b.best_upper),
        pr.num(b.best_lower),
        pr.num(b.best_upper),
    ]
    .join(",")
}

fn emit_bounds(rows: Vec<(f64, &str, BoundsReport)>, csv: bool, pr: &mut Printer) -> Result<(), Failure> {
    if csv || rows.len() > 1 {
        pr.line("p_or_a,kind,lower_boundary,lower_gamma,lower_curve,upper,best_lower,best_upper");
        for (key, kind, b) in &rows {
            let row = bounds_row(*key, kind, b, pr);
            pr.line(&row);
        }
        return Ok(());
    }
    let (key, kind, b) = &rows[0];
    let key_name = if *kind == "quartic" { "a" } else { "p" };
    let value = json!({ key_name: key, "kind": kind, "report": b });
    pr.json(&value);
    Ok(())
}

fn run_command(cli: &Cli, pr: &mut Printer) -> Result<(), Failure> {
    let cfg = numeric_config(cli)?;
    match &cli.command {
        Command::Conv(ConvCmd::Eval { surface, xi, tau }) => {
            let s = surface.build()?;
            let xi = parse_pair(xi).map_err(Failure::Usage)?;
            let v = conv_eval(&s, SpaceTimePoint::new(xi, *tau), &cfg)?;
            pr.json(&json!({
                "xi1": xi.x, "xi2": xi.y, "tau": tau,
                "value": v.value, "region": v.region, "err_est": v.err_est,
            }));
        }
        Command::Conv(ConvCmd::Grid { surface, xi1, xi2, tau, relative }) => {
            let s = surface.build()?;
            let (g1, g2, gt) = (
                parse_range(xi1, false).map_err(Failure::Usage)?,
                parse_range(xi2, false).map_err(Failure::Usage)?,
                parse_range(tau, false).map_err(Failure::Usage)?,
            );
            let mut points = Vec::with_capacity(g1.len() * g2.len() * gt.len());
            for &a in &g1 {
                for &b in &g2 {
                    for &t in &gt {
                        let xi = Vec2::new(a, b);
                        let tau = if *relative { 2.0 * s.psi(0.5 * xi) + t } else { t };
                        points.push(SpaceTimePoint::new(xi, tau));
                    }
                }
            }
            use rayon::prelude::*;
            let values = points.par_iter().map(|&p| conv_eval(&s, p, &cfg)).collect::<Result<Vec<_>, _>>()?;
            pr.line("xi1,xi2,tau,value,region,err_est");
            for (p, v) in points.iter().zip(values) {
                let row = format!(
                    "{},{},{},{},{},{}",
                    pr.num(p.xi.x),
                    pr.num(p.xi.y),
                    pr.num(p.tau),
                    pr.num(v.value),
                    v.region,
                    pr.num(v.err_est)
                );
                pr.line(&row);
            }
        }
        Command::Pp(PpCmd::Profile { p, lambda_min, lambda_max, count }) => {
            let lo = lambda_min.unwrap_or_else(|| sharp_ext_core::purepower::support_edge(*p));
            if !(lo > 0.0 && *lambda_max >= lo && *count >= 1) {
                return Err(Failure::Core(Error::Domain("need 0 < lambda_min ≤ lambda_max and count ≥ 1".into())));
            }
            let lambdas: Vec<f64> = (0..*count)
                .map(|k| if *count == 1 { lo } else { lo * (lambda_max / lo).powf(k as f64 / (*count - 1) as f64) })
                .collect();
            use rayon::prelude::*;
            let values = lambdas.par_iter().map(|&l| conv_pp(*p, l, &cfg)).collect::<Result<Vec<_>, _>>()?;
            pr.line("p,lambda,value,err_est");
            for (l, v) in lambdas.iter().zip(values) {
                let row = format!("{},{},{},{}", pr.num(*p), pr.num(*l), pr.num(v.value), pr.num(v.err_est));
                pr.line(&row);
            }
        }
        Command::Bounds(BoundsCmd::Quartic { a, csv }) => {
            if a.is_empty() {
                return Err(Failure::Usage("--a needs at least one value".into()));
            }
            let rows =
                a.iter().map(|&x| Ok((x, "quartic", quartic_bounds(x, &cfg)?))).collect::<Result<Vec<_>, Error>>()?;
            emit_bounds(rows, *csv, pr)?;
        }
        Command::Bounds(BoundsCmd::Purepower { p, csv }) => {
            if p.is_empty() {
                return Err(Failure::Usage("--p needs at least one value".into()));
            }
            let rows = p.iter().map(|&x| Ok((x, "purepower", pp_bounds(x)?))).collect::<Result<Vec<_>, Error>>()?;
            emit_bounds(rows, *csv, pr)?;
        }
        Command::Ratio(RatioArgs { sub: Some(RatioCmd::Concentration { surface, y0, n }), .. }) => {
            let s = surface.build()?;
            let y0 = parse_pair(y0).map_err(Failure::Usage)?;
            let report = concentration_study(&s, y0, n, &cfg)?;
            pr.json(&serde_json::to_value(&report).expect("report serialises"));
        }
        Command::Ratio(RatioArgs { sub: None, p }) => {
            let p = p.ok_or_else(|| Failure::Usage("ratio needs --p or a subcommand".into()))?;
            let r = strichartz_ratio_pp(p, &cfg)?;
            let text = pr.num(r.value);
            pr.line(&text);
        }
        Command::Crossover { tol } => {
            let p0 = crossover_p0(*tol)?;
            let text = pr.num(p0);
            pr.line(&text);
        }
        Command::Verify(cmd) => verify::run(cmd, &cfg, pr)?,
    }
    Ok(())
}

fn configure_threads() {
    if let Some(n) = std::env::var("SEL_THREADS").ok().and_then(|v| v.trim().parse::<usize>().ok()) {
        if n > 0 {
            // a pool that is already built keeps its size
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

fn run<I: IntoIterator<Item = OsString>>(args: I) -> u8 {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    configure_threads();
    let mut printer = Printer::new(cli.digits);
    let result = run_command(&cli, &mut printer);
    let text = printer.finish();
    let written = match &cli.out {
        Some(path) => fs::write(path, text).map_err(|e| format!("{}: {e}", path.display())),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(|e| e.to_string()),
    };
    match (result, written) {
        (Ok(()), Ok(())) => 0,
        (Err(f), _) => {
            eprintln!("sharpext: {f}");
            f.code()
        }
        (Ok(()), Err(e)) => {
            eprintln!("sharpext: {e}");
            EXIT_DOMAIN
        }
    }
}

fn main() -> ExitCode {
    ExitCode::from(run(std::env::args_os()))
}
