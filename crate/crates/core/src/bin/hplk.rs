//! Command-line front end.
//!
//! Settings resolve as command line, then `--config` file (`key = value`
//! lines, `#` comments), then built-in defaults. Exit codes: 0 success,
//! 1 runtime failure, 2 invalid configuration, 3 failed verification,
//! 4 non-convergence.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde::Serialize;

use hplk_core::heun::HeunError;
use hplk_core::io::{self, Format, FormatError};
use hplk_core::roots::RootError;
use hplk_core::spectral::{self, roots_in_b, trace_curve, Curve, CurveEquation, CurveSpec, Sign, SpectralError};
use hplk_core::torus::{
    monodromy_numeric, phase_lock_scan, rotation_estimate, Axis, GridSpec, MonodromyMatrix, PhysParams, RotationEstimate,
    RotationMethod, RotationOptions, TorusError,
};
use hplk_core::validation::{self, run_suite, Suite};

#[derive(Parser, Debug)]
#[command(name = "hplk", version, about = "Phase-lock portraits and spectral curves of the Josephson junction model")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Configuration file with `key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads; falls back to HPLK_THREADS.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Output format: csv, json or bin.
    #[arg(long, global = true)]
    format: Option<String>,
    /// Target accuracy.
    #[arg(long, global = true, allow_hyphen_values = true)]
    tol: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    omega: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Rotation numbers on a (B, A) grid.
    Portrait {
        /// B axis as lo:hi:n.
        #[arg(long, allow_hyphen_values = true)]
        b: Option<String>,
        /// A axis as lo:hi:n.
        #[arg(long, allow_hyphen_values = true)]
        a: Option<String>,
    },
    /// Points on B = lω where the Poincaré map is the identity.
    Adjacencies {
        #[arg(long)]
        l: Option<u32>,
        /// μ search range as lo:hi:n.
        #[arg(long, allow_hyphen_values = true)]
        mu: Option<String>,
    },
    /// Points where the polynomial determinant vanishes.
    Polypoints {
        /// Single value or inclusive range lo:hi.
        #[arg(long)]
        l: Option<String>,
    },
    /// Traces zero sets of the boundary or pasting equations.
    Boundary {
        /// e0, e1, paste or pasterho.
        #[arg(long)]
        eq: Option<String>,
        /// plus or minus.
        #[arg(long, allow_hyphen_values = true)]
        sign: Option<String>,
        /// Level for pasterho.
        #[arg(long, allow_hyphen_values = true)]
        r: Option<f64>,
        /// Seed search range in B as lo:hi:n.
        #[arg(long, allow_hyphen_values = true)]
        b: Option<String>,
        /// A range as lo:hi:steps.
        #[arg(long, allow_hyphen_values = true)]
        a: Option<String>,
    },
    /// Points where the rotation number equals a non-integer level.
    Levelcurve {
        #[arg(long, allow_hyphen_values = true)]
        r: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        b: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        a: Option<String>,
    },
    /// Rotation number at one point.
    Rotnum {
        #[arg(long, allow_hyphen_values = true)]
        b: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        a: Option<f64>,
        /// mobius or birkhoff.
        #[arg(long)]
        method: Option<String>,
    },
    /// Numerical monodromy of the linear system at one point.
    Monodromy {
        #[arg(long, allow_hyphen_values = true)]
        b: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        a: Option<f64>,
    },
    /// Value of the entire-solution equation; complex values as re or re,im.
    Xi {
        #[arg(long, allow_hyphen_values = true)]
        l: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        lambda: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        mu: Option<String>,
    },
    /// Real roots λ of the polynomial determinant.
    Polydet {
        #[arg(long)]
        l: Option<usize>,
        #[arg(long, allow_hyphen_values = true)]
        mu: Option<f64>,
    },
    /// Runs the acceptance checks.
    Verify {
        /// fast or full.
        #[arg(long)]
        suite: Option<String>,
    },
}

#[derive(Debug)]
enum CliError {
    Config(String),
    Runtime(String),
    Verification(String),
    NotConverged(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Runtime(_) => 1,
            CliError::Config(_) => 2,
            CliError::Verification(_) => 3,
            CliError::NotConverged(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Runtime(m) | CliError::Verification(m) | CliError::NotConverged(m) => m,
        }
    }
}

impl From<TorusError> for CliError {
    fn from(e: TorusError) -> Self {
        let m = e.to_string();
        match e {
            TorusError::InvalidOmega | TorusError::InvalidTolerance(_) | TorusError::InvalidGrid(_) => CliError::Config(m),
            TorusError::NotConverged { .. } | TorusError::NoBracket { .. } => CliError::NotConverged(m),
            TorusError::Heun(h) => h.into(),
            _ => CliError::Runtime(m),
        }
    }
}

impl From<HeunError> for CliError {
    fn from(e: HeunError) -> Self {
        let m = e.to_string();
        match e {
            HeunError::Product(_) | HeunError::Bessel(_) => CliError::Runtime(m),
            _ => CliError::Config(m),
        }
    }
}

impl From<SpectralError> for CliError {
    fn from(e: SpectralError) -> Self {
        let m = e.to_string();
        match e {
            SpectralError::LostTrack { .. } | SpectralError::Root(RootError::NotConverged { .. }) => CliError::NotConverged(m),
            SpectralError::Root(_) | SpectralError::Product(_) => CliError::Runtime(m),
            SpectralError::Heun(h) => h.into(),
            _ => CliError::Config(m),
        }
    }
}

impl From<FormatError> for CliError {
    fn from(e: FormatError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

type Result<T> = std::result::Result<T, CliError>;

/// Largest fraction of unconverged portrait cells accepted as success.
const MAX_UNCONVERGED: f64 = 0.01;
/// Largest period-map identity residual accepted for an adjacency.
const ADJACENCY_LIMIT: f64 = 1e-3;

/// `key = value` settings from the configuration file.
struct FileConfig(HashMap<String, String>);

impl FileConfig {
    fn load(path: Option<&PathBuf>) -> Result<Self> {
        let Some(path) = path else { return Ok(Self(HashMap::new())) };
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    fn parse(text: &str) -> Result<Self> {
        let mut map = HashMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| CliError::Config(format!("config line {}: expected key = value", n + 1)))?;
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(Self(map))
    }

    /// Command-line value, else file value, else `default`.
    fn pick<T: FromStr>(&self, cli: Option<T>, key: &str, default: Option<T>) -> Result<T> {
        if let Some(v) = cli {
            return Ok(v);
        }
        if let Some(s) = self.0.get(key) {
            return s.parse().map_err(|_| CliError::Config(format!("config key {key}: cannot parse '{s}'")));
        }
        default.ok_or_else(|| CliError::Config(format!("missing required setting --{key}")))
    }
}

fn parse_axis(s: &str) -> Result<Axis> {
    let bad = || CliError::Config(format!("expected lo:hi:n, got '{s}'"));
    let parts: Vec<&str> = s.split(':').collect();
    let [lo, hi, n] = parts.as_slice() else { return Err(bad()) };
    let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
    let n: usize = n.trim().parse().map_err(|_| bad())?;
    Ok(Axis::new(lo, hi, n)?)
}

fn parse_l_range(s: &str) -> Result<(u32, u32)> {
    let bad = || CliError::Config(format!("expected l or lo:hi, got '{s}'"));
    let (lo, hi) = s.split_once(':').unwrap_or((s, s));
    let lo: u32 = lo.trim().parse().map_err(|_| bad())?;
    let hi: u32 = hi.trim().parse().map_err(|_| bad())?;
    if hi < lo {
        return Err(bad());
    }
    Ok((lo, hi))
}

fn parse_complex(s: &str) -> Result<Complex64> {
    let bad = || CliError::Config(format!("expected re or re,im, got '{s}'"));
    let mut it = s.split(',').map(|p| p.trim().parse::<f64>().map_err(|_| bad()));
    let re = it.next().ok_or_else(bad)??;
    let im = it.next().transpose()?.unwrap_or(0.0);
    if it.next().is_some() {
        return Err(bad());
    }
    Ok(Complex64::new(re, im))
}

fn parse_sign(s: &str) -> Result<Sign> {
    match s {
        "plus" | "+" => Ok(Sign::Plus),
        "minus" | "-" => Ok(Sign::Minus),
        _ => Err(CliError::Config(format!("unknown sign '{s}' (plus, minus)"))),
    }
}

fn parse_equation(s: &str) -> Result<CurveEquation> {
    match s {
        "e0" => Ok(CurveEquation::E0),
        "e1" => Ok(CurveEquation::E1),
        "paste" => Ok(CurveEquation::Paste),
        "pasterho" => Ok(CurveEquation::Pasterho),
        _ => Err(CliError::Config(format!("unknown equation '{s}' (e0, e1, paste, pasterho)"))),
    }
}

fn parse_method(s: &str) -> Result<RotationMethod> {
    match s {
        "mobius" => Ok(RotationMethod::Mobius),
        "birkhoff" => Ok(RotationMethod::Birkhoff),
        _ => Err(CliError::Config(format!("unknown method '{s}' (mobius, birkhoff)"))),
    }
}

fn parse_suite(s: &str) -> Result<Suite> {
    match s {
        "fast" => Ok(Suite::Fast),
        "full" => Ok(Suite::Full),
        _ => Err(CliError::Config(format!("unknown suite '{s}' (fast, full)"))),
    }
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(|&x| io::fmt_f64(x)).collect::<Vec<_>>().join(",")
}

struct Output {
    path: Option<PathBuf>,
    format: Format,
}

impl Output {
    fn writer(&self) -> Result<Box<dyn Write>> {
        Ok(match &self.path {
            Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?)),
            None => Box::new(BufWriter::new(std::io::stdout().lock())),
        })
    }

    fn json<T: Serialize + ?Sized>(&self, value: &T) -> Result<()> {
        if self.format != Format::Json {
            return Err(CliError::Config("this command writes json only".into()));
        }
        let mut w = self.writer()?;
        io::write_json(value, &mut w)?;
        w.flush()?;
        Ok(())
    }

    /// CSV with the given header and rows, or JSON of `value`.
    fn table<T: Serialize + ?Sized>(&self, value: &T, header: &str, rows: impl Iterator<Item = String>) -> Result<()> {
        match self.format {
            Format::Json => self.json(value),
            Format::Csv => {
                let mut w = self.writer()?;
                writeln!(w, "{}", io::CSV_HEADER)?;
                writeln!(w, "{header}")?;
                for r in rows {
                    writeln!(w, "{r}")?;
                }
                w.flush()?;
                Ok(())
            }
            Format::Binary => Err(CliError::Config("binary output is available for portraits only".into())),
        }
    }
}

fn init_threads(cfg: &FileConfig, cli: Option<usize>) -> Result<()> {
    let env = std::env::var("HPLK_THREADS").ok().map(|s| s.parse::<usize>().map_err(|_| CliError::Config(format!("HPLK_THREADS: '{s}'"))));
    let threads = match (cli, env) {
        (Some(n), _) => Some(n),
        (None, Some(n)) => Some(n?),
        (None, None) => cfg.pick(None, "threads", Some(0)).ok().filter(|&n| n > 0),
    };
    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::Config("thread count must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct RotationReport {
    omega: f64,
    b: f64,
    a: f64,
    #[serde(flatten)]
    estimate: RotationEstimate,
}

#[derive(Serialize)]
struct MonodromyReport {
    omega: f64,
    b: f64,
    a: f64,
    matrix: MonodromyMatrix,
    eigenvalues: [Complex64; 2],
    rho: f64,
    eigenvalue_mismatch: f64,
}

#[derive(Serialize)]
struct XiReport {
    l: Complex64,
    lambda: Complex64,
    mu: Complex64,
    value: Complex64,
    scale: f64,
    normalized: f64,
    truncation_error: f64,
}

#[derive(Serialize)]
struct PolydetReport {
    l: usize,
    mu: f64,
    lambda_roots: Vec<f64>,
}

#[derive(Serialize)]
struct LevelPoint {
    a: f64,
    b: f64,
    residual: f64,
}

fn run(cli: Cli) -> Result<()> {
    let cfg = FileConfig::load(cli.common.config.as_ref())?;
    init_threads(&cfg, cli.common.threads)?;
    let tol: f64 = cfg.pick(cli.common.tol, "tol", Some(1e-6))?;
    if !(tol > 0.0 && tol < 1.0) {
        return Err(CliError::Config(format!("tol must lie in (0, 1), got {tol}")));
    }
    let omega = || cfg.pick(cli.common.omega, "omega", None::<f64>);
    let format_default = if matches!(cli.command, Command::Portrait { .. } | Command::Boundary { .. }) { "csv" } else { "json" };
    let format: Format = cfg.pick::<String>(cli.common.format.clone(), "format", Some(format_default.into()))?.parse().map_err(CliError::Config)?;
    let out = Output { path: cfg.pick(cli.common.out.clone(), "out", None).ok(), format };

    match cli.command {
        Command::Portrait { b, a } => {
            let grid = GridSpec {
                omega: omega()?,
                b: parse_axis(&cfg.pick(b, "b", None)?)?,
                a: parse_axis(&cfg.pick(a, "a", None)?)?,
            };
            let portrait = phase_lock_scan(&grid, tol, None)?;
            let mut w = out.writer()?;
            match out.format {
                Format::Csv => io::write_portrait_csv(&portrait, &mut w)?,
                Format::Json => io::write_json(&portrait, &mut w)?,
                Format::Binary => io::write_portrait_binary(&portrait, &mut w)?,
            }
            w.flush()?;
            let frac = portrait.unconverged_fraction();
            if frac > MAX_UNCONVERGED {
                return Err(CliError::NotConverged(format!("{:.2}% of cells did not converge", 100.0 * frac)));
            }
            Ok(())
        }
        Command::Adjacencies { l, mu } => {
            let omega = omega()?;
            let l = cfg.pick(l, "l", None)?;
            let mu = parse_axis(&cfg.pick(mu, "mu", Some("0.001:5:1000".into()))?)?;
            let pts = validation::adjacencies(omega, l, mu.lo, mu.hi, mu.n).map_err(CliError::Runtime)?;
            let rows = pts.iter().map(|p| join(&[p.mu, p.b, p.a, p.zeta_residual, p.poincare_residual, p.monodromy_distance]));
            out.table(&pts, "mu,B,A,zeta_residual,poincare_residual,monodromy_distance", rows)?;
            let failed = pts.iter().filter(|p| !(p.poincare_residual <= ADJACENCY_LIMIT)).count();
            if failed > 0 {
                return Err(CliError::Verification(format!("{failed} adjacencies fail the period-map identity test")));
            }
            Ok(())
        }
        Command::Polypoints { l } => {
            let omega = omega()?;
            let (l_lo, l_hi) = parse_l_range(&cfg.pick(l, "l", None)?)?;
            let mut pts = Vec::new();
            for l in l_lo..=l_hi {
                pts.extend(validation::poly_points(omega, l).map_err(CliError::Runtime)?);
            }
            let rows = pts.iter().map(|p| {
                format!(
                    "{},{},{},{}",
                    p.l,
                    join(&[p.mu, p.b, p.a, p.rho, p.edge_margin]),
                    p.on_scanned_boundary as u8,
                    join(&[p.trace_defect, p.monodromy_distance])
                )
            });
            out.table(&pts, "l,mu,B,A,rho,edge_margin,on_boundary,trace_defect,monodromy_distance", rows)?;
            let failed = pts.iter().filter(|p| !p.verified()).count();
            if failed > 0 {
                return Err(CliError::Verification(format!("{failed} points fail verification")));
            }
            Ok(())
        }
        Command::Boundary { eq, sign, r, b, a } => {
            let equation = parse_equation(&cfg.pick(eq, "eq", Some("e0".into()))?)?;
            let signs = match cfg.pick::<String>(sign, "sign", Some("both".into()))?.as_str() {
                "both" => vec![Sign::Plus, Sign::Minus],
                s => vec![parse_sign(s)?],
            };
            let mut spec = CurveSpec::new(equation, Sign::Plus, omega()?);
            if equation == CurveEquation::Pasterho {
                spec = spec.with_r(cfg.pick(r, "r", None)?);
            }
            let seeds = parse_axis(&cfg.pick(b, "b", None)?)?;
            let a = parse_axis(&cfg.pick(a, "a", None)?)?;
            let root_tol = tol.min(1e-10);
            let mut curves: Vec<Curve> = Vec::new();
            for sign in signs {
                let spec = CurveSpec { sign, ..spec };
                for seed in roots_in_b(&spec, a.lo, seeds.lo, seeds.hi, seeds.n, root_tol)? {
                    curves.push(trace_curve(&spec, a.lo, a.hi, a.n.max(2) - 1, seed.b, root_tol)?);
                }
            }
            let mut w = out.writer()?;
            match out.format {
                Format::Csv => io::write_curves_csv(&curves, &mut w)?,
                Format::Json => io::write_json(&curves, &mut w)?,
                Format::Binary => return Err(CliError::Config("binary output is available for portraits only".into())),
            }
            w.flush()?;
            Ok(())
        }
        Command::Levelcurve { r, b, a } => {
            let spec = CurveSpec::new(CurveEquation::Pasterho, Sign::Plus, omega()?).with_r(cfg.pick(r, "r", None)?);
            let b = parse_axis(&cfg.pick(b, "b", None)?)?;
            let a = parse_axis(&cfg.pick(a, "a", None)?)?;
            let mut pts = Vec::new();
            for av in a.values() {
                for p in roots_in_b(&spec, av, b.lo, b.hi, b.n, tol.min(1e-10))? {
                    pts.push(LevelPoint { a: p.a, b: p.b, residual: p.residual });
                }
            }
            let rows = pts.iter().map(|p| join(&[p.a, p.b, p.residual]));
            out.table(&pts, "A,B,residual", rows)
        }
        Command::Rotnum { b, a, method } => {
            let p = PhysParams::new(omega()?, cfg.pick(b, "b", None)?, cfg.pick(a, "a", None)?)?;
            let method = parse_method(&cfg.pick(method, "method", Some("mobius".into()))?)?;
            let est = rotation_estimate(&p, &RotationOptions::new(tol).with_method(method))?;
            out.json(&RotationReport { omega: p.omega, b: p.b, a: p.a, estimate: est })?;
            if !est.converged {
                return Err(CliError::NotConverged(format!("rotation number {} ± {:e} exceeds tol", est.rho, est.uncertainty)));
            }
            Ok(())
        }
        Command::Monodromy { b, a } => {
            let p = PhysParams::new(omega()?, cfg.pick(b, "b", None)?, cfg.pick(a, "a", None)?)?;
            let m = monodromy_numeric(&p, tol.clamp(1e-14, 1e-4))?;
            let est = rotation_estimate(&p, &RotationOptions::new(tol))?;
            out.json(&MonodromyReport {
                omega: p.omega,
                b: p.b,
                a: p.a,
                matrix: m,
                eigenvalues: m.m.eigenvalues(),
                rho: est.rho,
                eigenvalue_mismatch: m.eigenvalue_mismatch(est.rho, p.l()),
            })
        }
        Command::Xi { l, lambda, mu } => {
            let l = parse_complex(&cfg.pick(l, "l", None)?)?;
            let lambda = parse_complex(&cfg.pick(lambda, "lambda", None)?)?;
            let mu = parse_complex(&cfg.pick(mu, "mu", None)?)?;
            let v = spectral::xi(l, lambda, mu, tol.min(1e-10))?;
            out.json(&XiReport {
                l,
                lambda,
                mu,
                value: v.value,
                scale: v.scale,
                normalized: v.normalized(),
                truncation_error: v.truncation_error,
            })
        }
        Command::Polydet { l, mu } => {
            let l = cfg.pick(l, "l", None)?;
            let mu: f64 = cfg.pick(mu, "mu", None)?;
            out.json(&PolydetReport { l, mu, lambda_roots: spectral::tridiag_real_roots(l, mu) })
        }
        Command::Verify { suite } => {
            let suite = parse_suite(&cfg.pick(suite, "suite", Some("fast".into()))?)?;
            let report = run_suite(suite, |r| eprintln!("{}", r.line()));
            out.json(&report)?;
            let failed = report.checks.iter().filter(|c| !c.passed).count();
            if failed > 0 {
                return Err(CliError::Verification(format!("{failed} of {} checks failed", report.checks.len())));
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hplk: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
