//! Geodesic boundary-value problems by multi-start shooting, cotangent sphere
//! images and the Hopf–Rinow probe suite.
//!
//! Distances are estimates: a converged shot is a normal geodesic joining the
//! two points, and its length is an upper bound for the distance.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::duality::{check_covector, fiber_hamiltonian};
use crate::error::{Error, Result};
use crate::flow::{
    completeness_probe, propagate, sample_covectors, scale_to_dual_radius, ExtremalStatus, IntegrateOptions,
    DEFAULT_MIN_FIBER_FRACTION,
};
use crate::geometry::{bracket_generating, BracketReport, DEFAULT_RANK_TOL};
use crate::linalg::to_dvector;
use crate::spec::ManifoldSpec;

/// Slack allowed in triangle-inequality checks.
pub const TRIANGLE_TOL: f64 = 1e-6;

/// Number of radius shells the starts are spread over.
const SHELLS: usize = 4;
/// Smallest fiber weight of a start direction used when scaling it to a shell.
const MIN_SEED_DUAL: f64 = 0.25;
const LM_LAMBDA0: f64 = 1e-3;
/// Integration tolerance of the cheap refinement phase.
const COARSE_REL_TOL: f64 = 1e-6;
/// Relative residual at which refinement switches to full accuracy.
const HANDOVER: f64 = 1e-4;
/// Relative residual above which a start is not polished.
const ABANDON: f64 = 1e-2;
const LM_LAMBDA_MAX: f64 = 1e10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShootOptions {
    /// Residual below which a shot counts as reaching the target.
    pub tol: f64,
    pub n_starts: usize,
    /// Largest shell radius; defaults to `2 (1 + |y - x|)`.
    pub max_radius: Option<f64>,
    pub seed: u64,
    /// Levenberg–Marquardt iterations per start.
    pub max_iter: usize,
    pub integrate: IntegrateOptions,
}

impl Default for ShootOptions {
    fn default() -> Self {
        ShootOptions {
            tol: 1e-6,
            n_starts: 32,
            max_radius: None,
            seed: 0,
            max_iter: 40,
            integrate: IntegrateOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ShootStatus {
    Reached,
    Unreached,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeodesicResult {
    pub status: ShootStatus,
    pub p0: Vec<f64>,
    /// `F*(A(x)ᵀp0)`, the length of the unit-time extremal.
    pub length: f64,
    /// Chart-Euclidean distance from the endpoint to the target.
    pub residual: f64,
    pub starts_used: usize,
    /// Starts whose final residual is within tolerance.
    pub converged_starts: usize,
    pub endpoint: Vec<f64>,
}

struct Candidate {
    p: DVector<f64>,
    endpoint: Vec<f64>,
    residual: f64,
}

/// Radical inverse of `i` in base `b`.
fn radical_inverse(mut i: u64, b: u64) -> f64 {
    let inv = 1.0 / b as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % b) as f64;
        i /= b;
        f *= inv;
    }
    r
}

const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

/// Unit directions from a Halton sequence with a seeded Cranley–Patterson
/// rotation, mapped to `[-1, 1]ⁿ` and normalized.
fn start_directions(n: usize, count: usize, seed: u64) -> Vec<DVector<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift: Vec<f64> = (0..n).map(|_| rng.random()).collect();
    (0..count)
        .map(|i| {
            let mut d = DVector::from_fn(n, |m, _| {
                let base = PRIMES[m % PRIMES.len()];
                let h = (radical_inverse(i as u64 + 1, base) + shift[m]).fract();
                2.0 * h - 1.0
            });
            let len = d.norm();
            if len < 1e-12 {
                d = DVector::zeros(n);
                d[0] = 1.0;
            } else {
                d /= len;
            }
            d
        })
        .collect()
}

fn endpoint(spec: &ManifoldSpec, x: &[f64], p: &DVector<f64>, opts: &IntegrateOptions) -> Option<Vec<f64>> {
    match propagate(spec, x, p, 1.0, opts) {
        (ExtremalStatus::Completed, s) if s.x.iter().all(|v| v.is_finite()) => Some(s.x),
        _ => None,
    }
}

fn distance_to(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt()
}

fn jacobian(spec: &ManifoldSpec, x: &[f64], p: &DVector<f64>, rel_step: f64, opts: &IntegrateOptions) -> Option<DMatrix<f64>> {
    let n = spec.dim();
    let h = rel_step * (1.0 + p.norm());
    let mut jac = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut pp = p.clone();
        let mut pm = p.clone();
        pp[j] += h;
        pm[j] -= h;
        let fwd = endpoint(spec, x, &pp, opts)?;
        let bwd = endpoint(spec, x, &pm, opts)?;
        for i in 0..n {
            jac[(i, j)] = (fwd[i] - bwd[i]) / (2.0 * h);
        }
    }
    Some(jac)
}

/// Integration accuracy and finite-difference step of one refinement phase.
struct Phase {
    integrate: IntegrateOptions,
    fd_step: f64,
    /// Residual at which the phase hands over.
    goal: f64,
    /// Residual below which further iterations must keep paying off.
    satisfied: f64,
}

/// Levenberg–Marquardt on `|exp*_x(p) − target|²`, starting from a
/// candidate already evaluated under `phase.integrate`.
fn levenberg_marquardt(
    spec: &ManifoldSpec,
    x: &[f64],
    target: &DVector<f64>,
    mut c: Candidate,
    phase: &Phase,
    max_iter: usize,
) -> Candidate {
    let n = spec.dim();
    let mut r = to_dvector(&c.endpoint) - target;
    let mut lambda = LM_LAMBDA0;
    for _ in 0..max_iter {
        if c.residual <= phase.goal {
            break;
        }
        let Some(j) = jacobian(spec, x, &c.p, phase.fd_step, &phase.integrate) else {
            break;
        };
        let jtj = j.tr_mul(&j);
        let g = j.tr_mul(&r);
        let diag_floor = 1e-12 * (1.0 + jtj.diagonal().max());
        let mut improved = false;
        while lambda <= LM_LAMBDA_MAX {
            let mut m = jtj.clone();
            for i in 0..n {
                m[(i, i)] += lambda * jtj[(i, i)].max(diag_floor);
            }
            let Some(chol) = m.cholesky() else {
                lambda *= 4.0;
                continue;
            };
            let trial = &c.p - chol.solve(&g);
            if let Some(e) = endpoint(spec, x, &trial, &phase.integrate) {
                let tr = to_dvector(&e) - target;
                let tres = tr.norm();
                if tres < c.residual {
                    // Once satisfied, stop as soon as the gain becomes marginal.
                    improved = !(c.residual <= phase.satisfied && tres > 0.5 * c.residual);
                    c = Candidate { p: trial, endpoint: e, residual: tres };
                    r = tr;
                    lambda = (lambda / 3.0).max(1e-12);
                    break;
                }
            }
            lambda *= 4.0;
        }
        if !improved {
            break;
        }
    }
    c
}

fn evaluate(spec: &ManifoldSpec, x: &[f64], target: &DVector<f64>, p: DVector<f64>, opts: &IntegrateOptions) -> Option<Candidate> {
    let e = endpoint(spec, x, &p, opts)?;
    let residual = (to_dvector(&e) - target).norm();
    Some(Candidate { p, endpoint: e, residual })
}

/// Refines one start: a cheap phase with loose integration tolerances brings
/// the residual near zero, then a phase at the requested accuracy polishes.
/// Starts the cheap phase cannot bring close are not polished.
fn refine(spec: &ManifoldSpec, x: &[f64], y: &[f64], p0: DVector<f64>, opts: &ShootOptions) -> Option<Candidate> {
    let target = to_dvector(y);
    let scale = 1.0 + target.norm();
    let fine = Phase { integrate: opts.integrate, fd_step: 1e-6, goal: opts.tol * 1e-3, satisfied: opts.tol };
    let coarse = Phase {
        integrate: IntegrateOptions {
            rel_tol: opts.integrate.rel_tol.max(COARSE_REL_TOL),
            abs_tol: opts.integrate.abs_tol.max(COARSE_REL_TOL * 1e-3),
            ..opts.integrate
        },
        fd_step: 1e-4,
        goal: HANDOVER * scale,
        satisfied: HANDOVER * scale,
    };
    let c = evaluate(spec, x, &target, p0, &coarse.integrate)?;
    let c = levenberg_marquardt(spec, x, &target, c, &coarse, opts.max_iter);
    let c = evaluate(spec, x, &target, c.p, &fine.integrate)?;
    if c.residual > ABANDON * scale {
        return Some(c);
    }
    Some(levenberg_marquardt(spec, x, &target, c, &fine, opts.max_iter))
}

fn length_of(spec: &ManifoldSpec, x: &[f64], p: &DVector<f64>) -> f64 {
    spec.frame_matrix_unchecked(x)
        .ok()
        .and_then(|a| fiber_hamiltonian(spec.norm(), &(a.transpose() * p)).ok())
        .map(|h| (2.0 * h).sqrt())
        .unwrap_or(f64::NAN)
}

/// Lexicographic order on covectors via `total_cmp`.
fn lex_cmp(a: &DVector<f64>, b: &DVector<f64>) -> std::cmp::Ordering {
    a.iter()
        .zip(b.iter())
        .map(|(u, v)| u.total_cmp(v))
        .find(|o| o.is_ne())
        .unwrap_or(std::cmp::Ordering::Equal)
}

/// Initial covectors: unit directions spread over geometric shells
/// `r = max_radius · 2⁻ʲ`, each scaled so that `F*` of its fiber part is `r`.
fn start_covectors(spec: &ManifoldSpec, x: &[f64], y: &[f64], opts: &ShootOptions) -> Result<Vec<DVector<f64>>> {
    let a = spec.frame_matrix_unchecked(x)?;
    let max_radius = opts.max_radius.unwrap_or(2.0 * (1.0 + distance_to(x, y)));
    start_directions(spec.dim(), opts.n_starts, opts.seed)
        .into_iter()
        .enumerate()
        .map(|(i, d)| {
            let r = max_radius * 0.5f64.powi((i % SHELLS) as i32);
            let u = a.transpose() * &d;
            let f = if u.iter().all(|&c| c == 0.0) { 0.0 } else { (2.0 * fiber_hamiltonian(spec.norm(), &u)?).sqrt() };
            Ok(d * (r / f.max(MIN_SEED_DUAL)))
        })
        .collect()
}

/// Estimates the forward distance from `x` to `y` by shooting normal
/// geodesics of unit duration.
pub fn shoot(spec: &ManifoldSpec, x: &[f64], y: &[f64], opts: &ShootOptions) -> Result<GeodesicResult> {
    spec.check_point(x)?;
    spec.check_point(y)?;
    if x == y {
        return Err(Error::InvalidArgument("endpoints coincide".into()));
    }
    if !(opts.tol > 0.0) || opts.n_starts == 0 {
        return Err(Error::InvalidArgument("shooting needs tol > 0 and at least one start".into()));
    }
    if let Some(r) = opts.max_radius {
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::InvalidArgument(format!("max_radius must be positive, got {r}")));
        }
    }
    let starts = start_covectors(spec, x, y, opts)?;
    let candidates: Vec<Option<Candidate>> =
        starts.into_par_iter().map(|p0| refine(spec, x, y, p0, opts)).collect();

    let mut best_reached: Option<(f64, Candidate)> = None;
    let mut best_residual: Option<Candidate> = None;
    let mut converged = 0;
    for c in candidates.into_iter().flatten() {
        if c.residual <= opts.tol {
            converged += 1;
            let len = length_of(spec, x, &c.p);
            let better = match &best_reached {
                None => true,
                Some((bl, bc)) => len < *bl || (len == *bl && lex_cmp(&c.p, &bc.p).is_lt()),
            };
            if better {
                best_reached = Some((len, c));
            }
        } else if best_residual.as_ref().is_none_or(|b| c.residual < b.residual) {
            best_residual = Some(c);
        }
    }
    let (status, length, best) = match (best_reached, best_residual) {
        (Some((len, c)), _) => (ShootStatus::Reached, len, c),
        (None, Some(c)) => (ShootStatus::Unreached, length_of(spec, x, &c.p), c),
        (None, None) => {
            return Ok(GeodesicResult {
                status: ShootStatus::Unreached,
                p0: vec![f64::NAN; spec.dim()],
                length: f64::NAN,
                residual: f64::INFINITY,
                starts_used: opts.n_starts,
                converged_starts: 0,
                endpoint: vec![f64::NAN; spec.dim()],
            })
        }
    };
    Ok(GeodesicResult {
        status,
        p0: best.p.as_slice().to_vec(),
        length,
        residual: best.residual,
        starts_used: opts.n_starts,
        converged_starts: converged,
        endpoint: best.endpoint,
    })
}

/// Image of one covector of the cotangent sphere.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpherePoint {
    pub p: Vec<f64>,
    /// `exp*_x(p)`, or the last point inside the chart if the extremal escaped.
    pub point: Vec<f64>,
    #[serde(flatten)]
    pub status: ExtremalStatus,
}

fn image_points(
    spec: &ManifoldSpec,
    x: &[f64],
    covectors: Vec<DVector<f64>>,
    opts: &IntegrateOptions,
) -> Vec<SpherePoint> {
    covectors
        .into_par_iter()
        .map(|p| {
            let (status, state) = propagate(spec, x, &p, 1.0, opts);
            SpherePoint { p: p.as_slice().to_vec(), point: state.x, status }
        })
        .collect()
}

/// `exp*_x` of the given covector directions, each rescaled to `F* = r`.
pub fn sphere_points(
    spec: &ManifoldSpec,
    x: &[f64],
    r: f64,
    directions: &[DVector<f64>],
    opts: &IntegrateOptions,
) -> Result<Vec<SpherePoint>> {
    spec.check_point(x)?;
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::InvalidArgument(format!("sphere radius must be positive, got {r}")));
    }
    let a = spec.frame_matrix_unchecked(x)?;
    let covectors = directions
        .iter()
        .map(|d| {
            check_covector(spec, d)?;
            scale_to_dual_radius(spec, &(a.transpose() * d), d.clone(), r)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(image_points(spec, x, covectors, opts))
}

/// Images under `exp*_x` of `n` random covectors with `F*_x(p) = r`.
pub fn sphere_map(
    spec: &ManifoldSpec,
    x: &[f64],
    r: f64,
    n: usize,
    seed: u64,
    opts: &IntegrateOptions,
) -> Result<Vec<SpherePoint>> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::InvalidArgument(format!("sphere radius must be positive, got {r}")));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one sphere point".into()));
    }
    let covectors = sample_covectors(spec, x, r, n, seed, DEFAULT_MIN_FIBER_FRACTION)?;
    Ok(image_points(spec, x, covectors, opts))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeOptions {
    pub shoot: ShootOptions,
    pub completeness_dirs: usize,
    pub t_max: f64,
    pub bracket_depth: usize,
    /// Points and unit fiber vectors sampled for the coarse lower bound.
    pub lower_bound_samples: usize,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        ProbeOptions {
            shoot: ShootOptions::default(),
            completeness_dirs: 16,
            t_max: 100.0,
            bracket_depth: 4,
            lower_bound_samples: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairReport {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub forward: GeodesicResult,
    pub backward: GeodesicResult,
    /// `|d(x,y) − d(y,x)|` when both shots reached.
    pub asymmetry: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TriangleStats {
    /// Triples with all three shots reached.
    pub checked: usize,
    pub skipped: usize,
    pub violations: usize,
    /// Largest `d(x,z) − d(x,y) − d(y,z)` seen.
    pub max_excess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsymmetryStats {
    pub compared: usize,
    pub max_abs: f64,
    pub mean_abs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LowerBoundStats {
    /// Sampled `max |A(x) w| / F(w)` over the region.
    pub max_speed_ratio: f64,
    pub violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompletenessSummary {
    pub x: Vec<f64>,
    pub directions: usize,
    pub t_max: f64,
    pub completed: usize,
    pub fraction_extendable: f64,
    pub max_drift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HopfRinowReport {
    /// Always `"estimate"`: shot lengths are upper bounds, not certified distances.
    pub kind: &'static str,
    pub region: Vec<(f64, f64)>,
    pub seed: u64,
    pub pairs: Vec<PairReport>,
    pub success_fraction: f64,
    pub max_residual: f64,
    pub triangle: TriangleStats,
    pub asymmetry: AsymmetryStats,
    pub lower_bound: LowerBoundStats,
    pub bracket: BracketReport,
    pub completeness: CompletenessSummary,
}

fn check_region(spec: &ManifoldSpec, region: &[(f64, f64)]) -> Result<()> {
    let n = spec.dim();
    if region.len() != n {
        return Err(Error::InvalidArgument(format!("region needs {n} intervals, got {}", region.len())));
    }
    if region.iter().any(|(lo, hi)| !(lo < hi) || !lo.is_finite() || !hi.is_finite()) {
        return Err(Error::InvalidArgument("region intervals must satisfy lo < hi".into()));
    }
    // The chart domains are convex, so checking the corners suffices.
    for mask in 0..(1usize << n) {
        let corner: Vec<f64> =
            region.iter().enumerate().map(|(i, (lo, hi))| if mask >> i & 1 == 1 { *hi } else { *lo }).collect();
        if !spec.contains(&corner) {
            return Err(Error::Domain(format!("region corner {corner:?} lies outside the chart domain")));
        }
    }
    Ok(())
}

fn sample_region<R: Rng>(region: &[(f64, f64)], rng: &mut R) -> Vec<f64> {
    region.iter().map(|(lo, hi)| lo + (hi - lo) * rng.random::<f64>()).collect()
}

fn max_speed_ratio<R: Rng>(spec: &ManifoldSpec, region: &[(f64, f64)], samples: usize, rng: &mut R) -> Result<f64> {
    let k = spec.k();
    let mut best: f64 = 0.0;
    for _ in 0..samples.max(1) {
        let x = sample_region(region, rng);
        let a = spec.frame_matrix_unchecked(&x)?;
        for _ in 0..samples.max(1) {
            let w = DVector::from_fn(k, |_, _| rng.random_range(-1.0..1.0));
            let f = spec.norm().value(&w);
            if f > 0.0 {
                best = best.max((&a * &w).norm() / f);
            }
        }
    }
    Ok(best)
}

/// Runs the Hopf–Rinow probe suite on `n_pairs` uniform pairs in `region`:
/// forward and backward shots, triangle inequality over the triples
/// `(xᵢ, yᵢ, xᵢ₊₁)`, asymmetry, a coarse lower bound, bracket generation and
/// geodesic extendability at the region center.
pub fn hopf_rinow_probe(
    spec: &ManifoldSpec,
    region: &[(f64, f64)],
    n_pairs: usize,
    seed: u64,
    opts: &ProbeOptions,
) -> Result<HopfRinowReport> {
    check_region(spec, region)?;
    if n_pairs == 0 {
        return Err(Error::InvalidArgument("need at least one pair".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<(Vec<f64>, Vec<f64>)> =
        (0..n_pairs).map(|_| (sample_region(region, &mut rng), sample_region(region, &mut rng))).collect();
    let ratio = max_speed_ratio(spec, region, opts.lower_bound_samples, &mut rng)?;

    let mut jobs: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    for (i, (x, y)) in points.iter().enumerate() {
        jobs.push((x.clone(), y.clone()));
        jobs.push((y.clone(), x.clone()));
        if n_pairs > 1 {
            let z = &points[(i + 1) % n_pairs].0;
            jobs.push((y.clone(), z.clone()));
            jobs.push((x.clone(), z.clone()));
        }
    }
    let shots = jobs
        .iter()
        .map(|(a, b)| {
            if a == b {
                return Err(Error::InvalidArgument("sampled coincident points".into()));
            }
            shoot(spec, a, b, &opts.shoot)
        })
        .collect::<Result<Vec<_>>>()?;

    let per_pair = if n_pairs > 1 { 4 } else { 2 };
    let reached = |g: &GeodesicResult| g.status == ShootStatus::Reached;
    let mut pairs = Vec::with_capacity(n_pairs);
    let mut triangle = TriangleStats { checked: 0, skipped: 0, violations: 0, max_excess: f64::NEG_INFINITY };
    let mut lower_violations = 0;
    for (i, (x, y)) in points.iter().enumerate() {
        let s = &shots[i * per_pair..(i + 1) * per_pair];
        let (fwd, bwd) = (&s[0], &s[1]);
        let asymmetry = (reached(fwd) && reached(bwd)).then(|| (fwd.length - bwd.length).abs());
        if per_pair == 4 {
            let (yz, xz) = (&s[2], &s[3]);
            if reached(fwd) && reached(yz) && reached(xz) {
                let excess = xz.length - fwd.length - yz.length;
                triangle.checked += 1;
                triangle.max_excess = triangle.max_excess.max(excess);
                if excess > TRIANGLE_TOL {
                    triangle.violations += 1;
                }
            } else {
                triangle.skipped += 1;
            }
        }
        for (g, (a, b)) in s.iter().zip(&jobs[i * per_pair..(i + 1) * per_pair]) {
            if reached(g) && ratio > 0.0 && g.length < distance_to(a, b) / ratio - TRIANGLE_TOL {
                lower_violations += 1;
            }
        }
        pairs.push(PairReport { x: x.clone(), y: y.clone(), forward: fwd.clone(), backward: bwd.clone(), asymmetry });
    }
    if triangle.checked == 0 {
        triangle.max_excess = 0.0;
    }

    let pair_shots = pairs.iter().flat_map(|p| [&p.forward, &p.backward]);
    let success = pair_shots.clone().filter(|g| reached(g)).count();
    let max_residual = pair_shots.map(|g| g.residual).fold(0.0, f64::max);
    let asym: Vec<f64> = pairs.iter().filter_map(|p| p.asymmetry).collect();
    let asymmetry = AsymmetryStats {
        compared: asym.len(),
        max_abs: asym.iter().copied().fold(0.0, f64::max),
        mean_abs: if asym.is_empty() { 0.0 } else { asym.iter().sum::<f64>() / asym.len() as f64 },
    };

    let center: Vec<f64> = region.iter().map(|(lo, hi)| 0.5 * (lo + hi)).collect();
    let bracket = bracket_generating(spec, &center, opts.bracket_depth, DEFAULT_RANK_TOL)?;
    let comp = completeness_probe(spec, &center, opts.completeness_dirs, opts.t_max, seed, &opts.shoot.integrate)?;

    Ok(HopfRinowReport {
        kind: "estimate",
        region: region.to_vec(),
        seed,
        success_fraction: success as f64 / (2 * n_pairs) as f64,
        max_residual,
        triangle,
        asymmetry,
        lower_bound: LowerBoundStats { max_speed_ratio: ratio, violations: lower_violations },
        bracket,
        completeness: CompletenessSummary {
            x: comp.x,
            directions: opts.completeness_dirs,
            t_max: comp.t_max,
            completed: comp.completed,
            fraction_extendable: comp.fraction_extendable,
            max_drift: comp.max_drift,
        },
        pairs,
    })
}
