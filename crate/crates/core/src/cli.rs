//! The `subfinsler` command line.
//!
//! Exit codes: 0 on success, 1 on a mathematical failure (for example an
//! unreached target under `--require-reached`), 2 on configuration or usage
//! errors. Floats are written with 17 significant digits so that every output
//! round-trips exactly.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use serde::Serialize;

use crate::distance::{hopf_rinow_probe, shoot, sphere_map, ProbeOptions, ShootOptions, ShootStatus};
use crate::error::Error;
use crate::flow::{completeness_probe, exp_star_with, integrate_extremal, lift_fiber_momentum, IntegrateOptions};
use crate::duality::legendre_fiber_fwd;
use crate::geometry::{bracket_generating, DEFAULT_RANK_TOL};
use crate::spec::{parse_manifold_spec, ManifoldSpec};

/// Environment variable capping the worker threads used for batch shoots.
pub const THREADS_ENV: &str = "SUBFINSLER_THREADS";

const DEFAULT_SHOOT_TOL: f64 = 1e-6;

#[derive(Debug, Parser)]
#[command(name = "subfinsler", version, about = "Sub-Finsler geodesics, exponential maps and distances")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    /// The command's natural output: JSON lines, a JSON report or `key=value` text.
    Auto,
    Json,
    Csv,
}

#[derive(Debug, Args)]
struct Common {
    /// Manifold specification (JSON).
    #[arg(long)]
    spec: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Tolerance: integrator relative tolerance, shooting residual or rank
    /// tolerance depending on the command.
    #[arg(long)]
    tol: Option<f64>,
    /// Write output here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Auto)]
    format: Format,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate a normal extremal and write its trajectory.
    Geodesic {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        from: String,
        #[arg(long, allow_hyphen_values = true)]
        p0: String,
        #[arg(long = "T")]
        t: f64,
        #[arg(long, default_value_t = 128)]
        samples: usize,
    },
    /// Evaluate exp*(p0) or exp(v0).
    Exp {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        from: String,
        #[arg(long, allow_hyphen_values = true, conflicts_with = "v0", required_unless_present = "v0")]
        p0: Option<String>,
        /// Velocity in frame coordinates.
        #[arg(long, allow_hyphen_values = true)]
        v0: Option<String>,
    },
    /// Estimate the distance between two points by shooting.
    Distance {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        from: String,
        #[arg(long, allow_hyphen_values = true)]
        to: String,
        #[arg(long, default_value_t = 32)]
        starts: usize,
        #[arg(long)]
        max_radius: Option<f64>,
        /// Exit with status 1 unless the target is reached.
        #[arg(long)]
        require_reached: bool,
    },
    /// Images of a cotangent sphere under exp*.
    Sphere {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        at: String,
        #[arg(long)]
        r: f64,
        #[arg(long)]
        n: usize,
    },
    /// Check whether the frame is bracket generating at a point.
    CheckBracket {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        at: String,
        #[arg(long, default_value_t = 4)]
        depth: usize,
    },
    /// Integrate unit-speed extremals in random directions up to Tmax.
    ProbeCompleteness {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        at: String,
        #[arg(long, default_value_t = 16)]
        dirs: usize,
        #[arg(long = "Tmax", default_value_t = 100.0)]
        t_max: f64,
    },
    /// Shooting, triangle, asymmetry and completeness probes over a region.
    ProbeHopfRinow {
        #[command(flatten)]
        common: Common,
        /// Box as `lo:hi,lo:hi,...`.
        #[arg(long, allow_hyphen_values = true)]
        region: String,
        #[arg(long, default_value_t = 20)]
        pairs: usize,
        #[arg(long, default_value_t = 32)]
        starts: usize,
        #[arg(long, default_value_t = 16)]
        dirs: usize,
        #[arg(long = "Tmax", default_value_t = 100.0)]
        t_max: f64,
    },
}

/// Failure of a command, carrying its exit code.
#[derive(Debug)]
enum Failure {
    Config(String),
    Math(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Config(_) => 2,
            Failure::Math(_) => 1,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Syntax { .. }
            | Error::UnknownIdentifier { .. }
            | Error::Schema(_)
            | Error::Validation(_)
            | Error::InvalidArgument(_) => Failure::Config(e.to_string()),
            _ => Failure::Math(e.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Config(e.to_string())
    }
}

/// `%.17g`: 17 significant digits, trailing zeros removed.
pub fn format_g17(v: f64) -> String {
    if !v.is_finite() {
        return if v.is_nan() { "nan".into() } else if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return if v.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{v:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..17).contains(&exp) {
        let fixed = format!("{:.*}", (16 - exp) as usize, v);
        trim_zeros(&fixed).to_string()
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa), exp.abs())
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Compact JSON with floats in `%.17g`.
struct G17Formatter;

impl serde_json::ser::Formatter for G17Formatter {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(format_g17(value).as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, G17Formatter);
    value.serialize(&mut ser).expect("in-memory serialization");
    String::from_utf8(buf).expect("serde_json writes UTF-8")
}

fn vec_g17(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format_g17(*x)).collect();
    format!("[{}]", parts.join(","))
}

fn parse_point(s: &str, what: &str) -> Result<Vec<f64>, Failure> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| Failure::Config(format!("invalid {what} `{s}`: {e}")))
        .and_then(|v| {
            if v.iter().all(|x| x.is_finite()) {
                Ok(v)
            } else {
                Err(Failure::Config(format!("{what} must be finite")))
            }
        })
}

fn parse_region(s: &str) -> Result<Vec<(f64, f64)>, Failure> {
    s.split(',')
        .map(|iv| {
            let (lo, hi) = iv
                .split_once(':')
                .ok_or_else(|| Failure::Config(format!("region interval `{iv}` is not of the form lo:hi")))?;
            let lo: f64 = lo.trim().parse().map_err(|e| Failure::Config(format!("region bound `{lo}`: {e}")))?;
            let hi: f64 = hi.trim().parse().map_err(|e| Failure::Config(format!("region bound `{hi}`: {e}")))?;
            Ok((lo, hi))
        })
        .collect()
}

fn load_spec(common: &Common) -> Result<ManifoldSpec, Failure> {
    let text = fs::read_to_string(&common.spec)
        .map_err(|e| Failure::Config(format!("cannot read {}: {e}", common.spec.display())))?;
    parse_manifold_spec(&text).map_err(|e| Failure::Config(format!("{}: {e}", common.spec.display())))
}

fn point_in(spec: &ManifoldSpec, s: &str, what: &str) -> Result<Vec<f64>, Failure> {
    let x = parse_point(s, what)?;
    if x.len() != spec.dim() {
        return Err(Failure::Config(format!("{what} has {} coordinates, expected {}", x.len(), spec.dim())));
    }
    if !spec.contains(&x) {
        return Err(Failure::Config(format!("{what} {x:?} lies outside the chart domain")));
    }
    Ok(x)
}

fn covector(spec: &ManifoldSpec, s: &str, what: &str) -> Result<DVector<f64>, Failure> {
    let p = parse_point(s, what)?;
    if p.len() != spec.dim() {
        return Err(Failure::Config(format!("{what} has {} components, expected {}", p.len(), spec.dim())));
    }
    Ok(DVector::from_vec(p))
}

fn check_tol(tol: Option<f64>, default: f64) -> Result<f64, Failure> {
    let tol = tol.unwrap_or(default);
    if !(tol > 0.0) || !tol.is_finite() {
        return Err(Failure::Config(format!("--tol must be positive, got {tol}")));
    }
    Ok(tol)
}

fn integrate_opts(tol: Option<f64>) -> Result<IntegrateOptions, Failure> {
    let defaults = IntegrateOptions::default();
    Ok(IntegrateOptions { rel_tol: check_tol(tol, defaults.rel_tol)?, ..defaults })
}

fn csv_text(header: &[String], rows: Vec<Vec<String>>) -> Result<String, Failure> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    let bytes = w.into_inner().map_err(|e| Failure::Config(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv of UTF-8 fields"))
}

fn indexed(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (1..=n).map(move |i| format!("{prefix}{i}"))
}

fn g17_cells(v: &[f64]) -> impl Iterator<Item = String> + '_ {
    v.iter().map(|x| format_g17(*x))
}

fn lines<T: Serialize>(items: &[T]) -> String {
    items.iter().map(|i| to_json(i) + "\n").collect()
}

/// Runs a parsed command; diagnostics go to `diag`.
fn run(cli: Cli, diag: &mut String) -> Result<(String, Option<PathBuf>, i32), Failure> {
    let (common, output, code) = match cli.command {
        Command::Geodesic { common, from, p0, t, samples } => {
            let spec = load_spec(&common)?;
            let x0 = point_in(&spec, &from, "--from")?;
            let p0 = covector(&spec, &p0, "--p0")?;
            let opts = IntegrateOptions { samples, ..integrate_opts(common.tol)? };
            let ext = integrate_extremal(&spec, &x0, &p0, t, &opts)?;
            diag.push_str(&format!(
                "status={} max_drift={} accepted_steps={}\n",
                status_cells(&ext.status).0,
                format_g17(ext.max_drift),
                ext.accepted_steps
            ));
            let out = match common.format {
                Format::Csv => {
                    let n = spec.dim();
                    let header = std::iter::once("t".to_string())
                        .chain(indexed("x", n))
                        .chain(indexed("p", n))
                        .chain(std::iter::once("H".to_string()))
                        .collect::<Vec<_>>();
                    let rows = ext
                        .samples
                        .iter()
                        .map(|s| {
                            std::iter::once(format_g17(s.t))
                                .chain(g17_cells(&s.x))
                                .chain(g17_cells(&s.p))
                                .chain(std::iter::once(format_g17(s.h)))
                                .collect()
                        })
                        .collect();
                    csv_text(&header, rows)?
                }
                _ => lines(&ext.samples),
            };
            (common, out, 0)
        }
        Command::Exp { common, from, p0, v0 } => {
            let spec = load_spec(&common)?;
            let x = point_in(&spec, &from, "--from")?;
            let opts = integrate_opts(common.tol)?;
            let p = match (p0, v0) {
                (Some(p0), _) => covector(&spec, &p0, "--p0")?,
                (None, Some(v0)) => {
                    let w = parse_point(&v0, "--v0")?;
                    if w.len() != spec.k() {
                        return Err(Failure::Config(format!("--v0 needs {} frame coordinates", spec.k())));
                    }
                    let u = legendre_fiber_fwd(spec.norm(), &DVector::from_vec(w))?;
                    lift_fiber_momentum(&spec, &x, &u.0)?
                }
                (None, None) => return Err(Failure::Config("one of --p0 or --v0 is required".into())),
            };
            let point = exp_star_with(&spec, &x, &p, &opts)?;
            let out = match common.format {
                Format::Csv => {
                    let n = spec.dim();
                    let header: Vec<String> = indexed("x", n).chain(indexed("p", n)).chain(indexed("y", n)).collect();
                    let row = g17_cells(&x).chain(g17_cells(p.as_slice())).chain(g17_cells(&point)).collect();
                    csv_text(&header, vec![row])?
                }
                _ => {
                    #[derive(Serialize)]
                    struct ExpOut<'a> {
                        x: &'a [f64],
                        p0: &'a [f64],
                        point: &'a [f64],
                    }
                    to_json(&ExpOut { x: &x, p0: p.as_slice(), point: &point }) + "\n"
                }
            };
            (common, out, 0)
        }
        Command::Distance { common, from, to, starts, max_radius, require_reached } => {
            let spec = load_spec(&common)?;
            let x = point_in(&spec, &from, "--from")?;
            let y = point_in(&spec, &to, "--to")?;
            let opts = ShootOptions {
                tol: check_tol(common.tol, DEFAULT_SHOOT_TOL)?,
                n_starts: starts,
                max_radius,
                seed: common.seed,
                ..ShootOptions::default()
            };
            let g = shoot(&spec, &x, &y, &opts)?;
            let status = match g.status {
                ShootStatus::Reached => "reached",
                ShootStatus::Unreached => "unreached",
            };
            let out = match common.format {
                Format::Json => to_json(&g) + "\n",
                Format::Csv => {
                    let n = spec.dim();
                    let header: Vec<String> = ["status", "length", "residual", "starts_used", "converged_starts"]
                        .iter()
                        .map(|s| s.to_string())
                        .chain(indexed("p", n))
                        .chain(indexed("y", n))
                        .collect();
                    let row = [
                        status.to_string(),
                        format_g17(g.length),
                        format_g17(g.residual),
                        g.starts_used.to_string(),
                        g.converged_starts.to_string(),
                    ]
                    .into_iter()
                    .chain(g17_cells(&g.p0))
                    .chain(g17_cells(&g.endpoint))
                    .collect();
                    csv_text(&header, vec![row])?
                }
                Format::Auto => format!(
                    "status={status}\nlength={}\nresidual={}\np0={}\nendpoint={}\nstarts_used={}\nconverged_starts={}\n",
                    format_g17(g.length),
                    format_g17(g.residual),
                    vec_g17(&g.p0),
                    vec_g17(&g.endpoint),
                    g.starts_used,
                    g.converged_starts
                ),
            };
            let code = if require_reached && g.status != ShootStatus::Reached {
                diag.push_str(&format!("target not reached (residual {})\n", format_g17(g.residual)));
                1
            } else {
                0
            };
            (common, out, code)
        }
        Command::Sphere { common, at, r, n } => {
            let spec = load_spec(&common)?;
            let x = point_in(&spec, &at, "--at")?;
            let pts = sphere_map(&spec, &x, r, n, common.seed, &integrate_opts(common.tol)?)?;
            let out = match common.format {
                Format::Csv => {
                    let d = spec.dim();
                    let header: Vec<String> =
                        indexed("p", d).chain(indexed("y", d)).chain(["status".to_string(), "t".to_string()]).collect();
                    let rows = pts
                        .iter()
                        .map(|sp| {
                            let (status, t) = status_cells(&sp.status);
                            g17_cells(&sp.p).chain(g17_cells(&sp.point)).chain([status, t]).collect()
                        })
                        .collect();
                    csv_text(&header, rows)?
                }
                _ => lines(&pts),
            };
            (common, out, 0)
        }
        Command::CheckBracket { common, at, depth } => {
            let spec = load_spec(&common)?;
            let x = point_in(&spec, &at, "--at")?;
            let report = bracket_generating(&spec, &x, depth, check_tol(common.tol, DEFAULT_RANK_TOL)?)?;
            let out = match common.format {
                Format::Json => to_json(&report) + "\n",
                Format::Csv => {
                    let growth: Vec<String> = report.growth_vector.iter().map(|g| g.to_string()).collect();
                    csv_text(&["generating".into(), "growth".into()], vec![vec![report.generating.to_string(), growth.join(" ")]])?
                }
                Format::Auto => {
                    let growth: Vec<String> = report.growth_vector.iter().map(|g| g.to_string()).collect();
                    format!("generating={} growth=[{}]\n", report.generating, growth.join(","))
                }
            };
            (common, out, 0)
        }
        Command::ProbeCompleteness { common, at, dirs, t_max } => {
            let spec = load_spec(&common)?;
            let x = point_in(&spec, &at, "--at")?;
            let report = completeness_probe(&spec, &x, dirs, t_max, common.seed, &integrate_opts(common.tol)?)?;
            let out = match common.format {
                Format::Csv => {
                    let d = spec.dim();
                    let header: Vec<String> = indexed("p", d)
                        .chain(["status", "t_reached", "max_drift"].map(String::from))
                        .collect();
                    let rows = report
                        .directions
                        .iter()
                        .map(|o| {
                            let (status, _) = status_cells(&o.status);
                            g17_cells(&o.p0)
                                .chain([status, format_g17(o.t_reached), format_g17(o.max_drift)])
                                .collect()
                        })
                        .collect();
                    csv_text(&header, rows)?
                }
                _ => to_json(&report) + "\n",
            };
            (common, out, 0)
        }
        Command::ProbeHopfRinow { common, region, pairs, starts, dirs, t_max } => {
            let spec = load_spec(&common)?;
            let region = parse_region(&region)?;
            let defaults = ProbeOptions::default();
            let opts = ProbeOptions {
                shoot: ShootOptions {
                    tol: check_tol(common.tol, DEFAULT_SHOOT_TOL)?,
                    n_starts: starts,
                    seed: common.seed,
                    ..defaults.shoot
                },
                completeness_dirs: dirs,
                t_max,
                ..defaults
            };
            let report = hopf_rinow_probe(&spec, &region, pairs, common.seed, &opts)?;
            let out = match common.format {
                Format::Csv => {
                    let d = spec.dim();
                    let header: Vec<String> = indexed("x", d)
                        .chain(indexed("y", d))
                        .chain(
                            ["forward_status", "forward_length", "forward_residual", "backward_status", "backward_length", "backward_residual"]
                                .map(String::from),
                        )
                        .collect();
                    let status = |s: ShootStatus| if s == ShootStatus::Reached { "reached" } else { "unreached" }.to_string();
                    let rows = report
                        .pairs
                        .iter()
                        .map(|p| {
                            g17_cells(&p.x)
                                .chain(g17_cells(&p.y))
                                .chain([
                                    status(p.forward.status),
                                    format_g17(p.forward.length),
                                    format_g17(p.forward.residual),
                                    status(p.backward.status),
                                    format_g17(p.backward.length),
                                    format_g17(p.backward.residual),
                                ])
                                .collect()
                        })
                        .collect();
                    csv_text(&header, rows)?
                }
                _ => to_json(&report) + "\n",
            };
            (common, out, 0)
        }
    };
    Ok((output, common.out, code))
}

fn status_cells(status: &crate::flow::ExtremalStatus) -> (String, String) {
    use crate::flow::ExtremalStatus::*;
    match status {
        Completed => ("completed".into(), String::new()),
        Escaped { t } => ("escaped".into(), format_g17(*t)),
        StepFailure { t } => ("step_failure".into(), format_g17(*t)),
    }
}

fn thread_count() -> Result<usize, Failure> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(0),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(Failure::Config(format!("{THREADS_ENV} must be a positive integer, got `{v}`"))),
        },
    }
}

/// Runs the command line `args` (including the program name), writing
/// results to `stdout` unless `--out` is given, and returns the exit code.
pub fn run_cli<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { stdout.write_all(text.as_bytes()) } else { stderr.write_all(text.as_bytes()) };
            return code;
        }
    };
    let mut diag = String::new();
    let result = thread_count().and_then(|threads| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Failure::Config(format!("cannot start worker threads: {e}")))?;
        pool.install(|| run(cli, &mut diag))
    });
    let _ = stderr.write_all(diag.as_bytes());
    match result {
        Ok((text, out, code)) => {
            let written = match out {
                Some(path) => fs::write(&path, text.as_bytes())
                    .map_err(|e| format!("cannot write {}: {e}", path.display())),
                None => stdout.write_all(text.as_bytes()).map_err(|e| e.to_string()),
            };
            match written {
                Ok(()) => code,
                Err(msg) => {
                    let _ = writeln!(stderr, "error: {msg}");
                    2
                }
            }
        }
        Err(f) => {
            let (Failure::Config(msg) | Failure::Math(msg)) = &f;
            let _ = writeln!(stderr, "error: {msg}");
            f.code()
        }
    }
}
