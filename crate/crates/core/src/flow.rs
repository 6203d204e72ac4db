//! Normal extremals of the sub-Hamiltonian system and the exponential maps.
//!
//! The flow is generated directly from `H(x, p) = Ĥ(A(x)ᵀp)`:
//!
//! ```text
//! ẋ = A(x) w,   ṗ_i = −Σ_a w_a ⟨p, ∂_i X_a(x)⟩,   w = 𝓛_H(A(x)ᵀp)
//! ```
//!
//! Covectors in the annihilator of the distribution (`A(x)ᵀp = 0`) give
//! stationary extremals.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::duality::{check_covector, fiber_hamiltonian, invert_fiber_derivative, legendre_fiber_fwd};
use crate::error::{Error, Result};
use crate::integrator::{self, Point, StepControl, Termination};
use crate::linalg::{min_norm_lift, to_dvector};
use crate::norm::NormKind;
use crate::spec::ManifoldSpec;

/// Minimum number of dense samples stored on an extremal.
pub const MIN_SAMPLES: usize = 128;

/// A point of the cotangent bundle: base point and momentum covector.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtremalState {
    pub x: Vec<f64>,
    pub p: Vec<f64>,
}

impl ExtremalState {
    fn from_flat(y: &[f64], n: usize) -> Self {
        ExtremalState { x: y[..n].to_vec(), p: y[n..].to_vec() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ExtremalStatus {
    Completed,
    /// Left the chart domain at `t`.
    Escaped { t: f64 },
    StepFailure { t: f64 },
}

impl From<Termination> for ExtremalStatus {
    fn from(t: Termination) -> Self {
        match t {
            Termination::Completed => ExtremalStatus::Completed,
            Termination::Escaped { t } => ExtremalStatus::Escaped { t },
            Termination::StepFailure { t } => ExtremalStatus::StepFailure { t },
        }
    }
}

/// One dense output sample.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtremalSample {
    pub t: f64,
    pub x: Vec<f64>,
    pub p: Vec<f64>,
    #[serde(rename = "H")]
    pub h: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalExtremal {
    pub samples: Vec<ExtremalSample>,
    pub h0: f64,
    /// Largest `|H − H0|` over samples and accepted step ends.
    pub max_drift: f64,
    pub status: ExtremalStatus,
    pub final_state: ExtremalState,
    pub accepted_steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrateOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_steps: usize,
    /// Number of uniformly spaced output samples (at least [`MIN_SAMPLES`]).
    pub samples: usize,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        IntegrateOptions { rel_tol: 1e-9, abs_tol: 1e-12, max_steps: 1_000_000, samples: MIN_SAMPLES }
    }
}

impl IntegrateOptions {
    fn control(&self) -> StepControl {
        StepControl { rel_tol: self.rel_tol, abs_tol: self.abs_tol, max_steps: self.max_steps }
    }
}

/// Evaluates `(ẋ, ṗ)` for flat states `y = (x, p)` with reusable buffers;
/// no domain check.
pub(crate) struct Rhs<'a> {
    spec: &'a ManifoldSpec,
    /// Frame matrix, column-major.
    frame: Vec<f64>,
    u: Vec<f64>,
    w: Vec<f64>,
}

impl<'a> Rhs<'a> {
    pub(crate) fn new(spec: &'a ManifoldSpec) -> Self {
        let (n, k) = (spec.dim(), spec.k());
        Rhs { spec, frame: vec![0.0; n * k], u: vec![0.0; k], w: vec![0.0; k] }
    }

    pub(crate) fn eval(&mut self, y: &[f64], dy: &mut [f64]) -> Result<()> {
        let spec = self.spec;
        let n = spec.dim();
        let (x, p) = y.split_at(n);
        spec.frame_into(x, &mut self.frame)?;
        for (ua, col) in self.u.iter_mut().zip(self.frame.chunks_exact(n)) {
            *ua = col.iter().zip(p).map(|(c, pm)| c * pm).sum();
        }
        dy.fill(0.0);
        if self.u.iter().all(|&c| c == 0.0) {
            return Ok(());
        }
        match spec.norm().kind() {
            NormKind::Euclidean => self.w.copy_from_slice(&self.u),
            _ => {
                let w = invert_fiber_derivative(spec.norm(), &DVector::from_column_slice(&self.u))?;
                self.w.copy_from_slice(w.as_slice());
            }
        }
        let (dx, dp) = dy.split_at_mut(n);
        for (col, wa) in self.frame.chunks_exact(n).zip(&self.w) {
            for (d, c) in dx.iter_mut().zip(col) {
                *d += wa * c;
            }
        }
        spec.accumulate_costate(x, p, &self.w, dp)
    }
}

/// `(∂H/∂p, −∂H/∂x)` at `s`.
pub fn hamiltonian_rhs(spec: &ManifoldSpec, s: &ExtremalState) -> Result<(DVector<f64>, DVector<f64>)> {
    spec.check_point(&s.x)?;
    check_covector(spec, &to_dvector(&s.p))?;
    let n = spec.dim();
    let mut y = s.x.clone();
    y.extend_from_slice(&s.p);
    let mut dy = vec![0.0; 2 * n];
    Rhs::new(spec).eval(&y, &mut dy)?;
    Ok((DVector::from_column_slice(&dy[..n]), DVector::from_column_slice(&dy[n..])))
}

fn hamiltonian_flat(spec: &ManifoldSpec, y: &[f64]) -> f64 {
    let n = spec.dim();
    let (x, p) = y.split_at(n);
    spec.frame_matrix_unchecked(x)
        .ok()
        .and_then(|a| fiber_hamiltonian(spec.norm(), &(a.transpose() * DVector::from_column_slice(p))).ok())
        .unwrap_or(f64::NAN)
}

fn check_start(spec: &ManifoldSpec, x0: &[f64], p0: &DVector<f64>, t_end: f64) -> Result<()> {
    spec.check_point(x0)?;
    check_covector(spec, p0)?;
    if !(t_end > 0.0) || !t_end.is_finite() {
        return Err(Error::InvalidArgument(format!("integration time must be positive, got {t_end}")));
    }
    Ok(())
}

/// Integrates the normal extremal from `(x0, p0)` over `[0, t_end]`, with
/// dense output samples and energy-drift monitoring. Leaving the domain or a
/// step-size underflow is reported in `status`, not as an error.
pub fn integrate_extremal(
    spec: &ManifoldSpec,
    x0: &[f64],
    p0: &DVector<f64>,
    t_end: f64,
    opts: &IntegrateOptions,
) -> Result<NormalExtremal> {
    check_start(spec, x0, p0, t_end)?;
    let n = spec.dim();
    let mut y0 = x0.to_vec();
    y0.extend_from_slice(p0.as_slice());
    let h0 = hamiltonian_flat(spec, &y0);

    let count = opts.samples.max(MIN_SAMPLES);
    let times: Vec<f64> = (0..count)
        .map(|j| if j + 1 == count { t_end } else { t_end * j as f64 / (count - 1) as f64 })
        .collect();
    let mut samples = Vec::with_capacity(count);
    let mut max_drift: f64 = 0.0;
    let mut rhs = Rhs::new(spec);
    let outcome = integrator::integrate(
        |y, dy| rhs.eval(y, dy),
        &y0,
        t_end,
        &opts.control(),
        |y| spec.domain().contains(&y[..n]),
        &times,
        |t, y, kind| {
            let h = hamiltonian_flat(spec, y);
            let drift = (h - h0).abs();
            max_drift = if drift.is_nan() { f64::INFINITY } else { max_drift.max(drift) };
            if kind == Point::Sample {
                samples.push(ExtremalSample { t, x: y[..n].to_vec(), p: y[n..].to_vec(), h });
            }
        },
    );
    Ok(NormalExtremal {
        samples,
        h0,
        max_drift,
        status: outcome.termination.into(),
        final_state: ExtremalState::from_flat(&outcome.y, n),
        accepted_steps: outcome.accepted_steps,
    })
}

/// Endpoint of the extremal over `[0, t_end]` without storing samples.
pub(crate) fn propagate(
    spec: &ManifoldSpec,
    x0: &[f64],
    p0: &DVector<f64>,
    t_end: f64,
    opts: &IntegrateOptions,
) -> (ExtremalStatus, ExtremalState) {
    let n = spec.dim();
    let mut y0 = x0.to_vec();
    y0.extend_from_slice(p0.as_slice());
    let mut rhs = Rhs::new(spec);
    let outcome = integrator::integrate(
        |y, dy| rhs.eval(y, dy),
        &y0,
        t_end,
        &opts.control(),
        |y| spec.domain().contains(&y[..n]),
        &[],
        |_, _, _| {},
    );
    (outcome.termination.into(), ExtremalState::from_flat(&outcome.y, n))
}

/// `exp*_x(p)`: base point of the unit-time extremal.
pub fn exp_star(spec: &ManifoldSpec, x: &[f64], p: &DVector<f64>) -> Result<Vec<f64>> {
    exp_star_with(spec, x, p, &IntegrateOptions::default())
}

pub fn exp_star_with(spec: &ManifoldSpec, x: &[f64], p: &DVector<f64>, opts: &IntegrateOptions) -> Result<Vec<f64>> {
    check_start(spec, x, p, 1.0)?;
    match propagate(spec, x, p, 1.0, opts) {
        (ExtremalStatus::Completed, state) => Ok(state.x),
        (ExtremalStatus::Escaped { t } | ExtremalStatus::StepFailure { t }, _) => {
            Err(Error::OutsideDomainOfExp { t })
        }
    }
}

/// Minimum-norm covector `p` with `A(x)ᵀp = u`.
pub fn lift_fiber_momentum(spec: &ManifoldSpec, x: &[f64], u: &DVector<f64>) -> Result<DVector<f64>> {
    spec.check_point(x)?;
    let a = spec.frame_matrix_unchecked(x)?;
    min_norm_lift(&a, u).ok_or_else(|| Error::Domain(format!("frame is degenerate at {x:?}")))
}

/// `exp_x(w) = exp*_x(p)` for the minimum-norm covector `p` over `𝓛_L(w)`.
pub fn exp_map(spec: &ManifoldSpec, x: &[f64], w: &DVector<f64>) -> Result<Vec<f64>> {
    if w.len() != spec.k() {
        return Err(Error::InvalidArgument(format!("velocity must have {} frame coordinates", spec.k())));
    }
    let u = legendre_fiber_fwd(spec.norm(), w)?;
    let p = lift_fiber_momentum(spec, x, &u.0)?;
    exp_star(spec, x, &p)
}

/// Central-difference Jacobian of `p ↦ exp*_x(p)`.
pub fn jacobian_exp_star(spec: &ManifoldSpec, x: &[f64], p: &DVector<f64>) -> Result<DMatrix<f64>> {
    jacobian_exp_star_with(spec, x, p, &IntegrateOptions::default())
}

pub fn jacobian_exp_star_with(
    spec: &ManifoldSpec,
    x: &[f64],
    p: &DVector<f64>,
    opts: &IntegrateOptions,
) -> Result<DMatrix<f64>> {
    check_start(spec, x, p, 1.0)?;
    let a = spec.frame_matrix_unchecked(x)?;
    if (a.transpose() * p).iter().all(|&c| c == 0.0) {
        return Err(Error::ZeroVector);
    }
    fd_jacobian(spec, x, p, opts)
}

/// Columns `(exp*(p + h e_j) − exp*(p − h e_j)) / 2h` with `h = 1e-6 (1 + |p|)`.
pub(crate) fn fd_jacobian(spec: &ManifoldSpec, x: &[f64], p: &DVector<f64>, opts: &IntegrateOptions) -> Result<DMatrix<f64>> {
    let n = spec.dim();
    let h = 1e-6 * (1.0 + p.norm());
    let mut jac = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut pp = p.clone();
        let mut pm = p.clone();
        pp[j] += h;
        pm[j] -= h;
        let fwd = exp_star_with(spec, x, &pp, opts)?;
        let bwd = exp_star_with(spec, x, &pm, opts)?;
        for i in 0..n {
            jac[(i, j)] = (fwd[i] - bwd[i]) / (2.0 * h);
        }
    }
    Ok(jac)
}

/// Fraction of the Euclidean unit length of a direction that must survive
/// the reduction to fiber momenta; directions dominated by the annihilator
/// are rejected and redrawn.
pub const DEFAULT_MIN_FIBER_FRACTION: f64 = 0.5;

/// `count` covectors at `x` with `F*(A(x)ᵀp) = radius`, drawn from Gaussian
/// directions with rejection of annihilator-dominated ones.
pub fn sample_covectors(
    spec: &ManifoldSpec,
    x: &[f64],
    radius: f64,
    count: usize,
    seed: u64,
    min_fiber_fraction: f64,
) -> Result<Vec<DVector<f64>>> {
    spec.check_point(x)?;
    let a = spec.frame_matrix_unchecked(x)?;
    let n = spec.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0usize;
    while out.len() < count {
        attempts += 1;
        if attempts > 1000 * (count + 1) {
            return Err(Error::InvalidArgument(
                "could not draw covectors with enough weight on the distribution".into(),
            ));
        }
        let d: DVector<f64> = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
        let len = d.norm();
        if len == 0.0 {
            continue;
        }
        let d = d / len;
        let u = a.transpose() * &d;
        if u.norm() < min_fiber_fraction {
            continue;
        }
        out.push(scale_to_dual_radius(spec, &u, d, radius)?);
    }
    Ok(out)
}

/// Rescales `p` (with fiber momentum `u`) so that `F*(u) = radius`.
pub(crate) fn scale_to_dual_radius(spec: &ManifoldSpec, u: &DVector<f64>, p: DVector<f64>, radius: f64) -> Result<DVector<f64>> {
    let f = (2.0 * fiber_hamiltonian(spec.norm(), u)?).sqrt();
    if f == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok(p * (radius / f))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DirectionOutcome {
    pub p0: Vec<f64>,
    #[serde(flatten)]
    pub status: ExtremalStatus,
    /// Time reached before stopping.
    pub t_reached: f64,
    pub max_drift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompletenessReport {
    pub x: Vec<f64>,
    pub t_max: f64,
    pub directions: Vec<DirectionOutcome>,
    pub completed: usize,
    pub fraction_extendable: f64,
    /// Largest drift over completed extremals.
    pub max_drift: f64,
}

/// Integrates `n_dirs` unit-energy (`H = ½`) extremals from `x` up to `t_max`
/// and reports how many extend over the whole interval.
pub fn completeness_probe(
    spec: &ManifoldSpec,
    x: &[f64],
    n_dirs: usize,
    t_max: f64,
    seed: u64,
    opts: &IntegrateOptions,
) -> Result<CompletenessReport> {
    if n_dirs == 0 {
        return Err(Error::InvalidArgument("need at least one direction".into()));
    }
    let covectors = sample_covectors(spec, x, 1.0, n_dirs, seed, DEFAULT_MIN_FIBER_FRACTION)?;
    let directions = covectors
        .par_iter()
        .map(|p0| {
            let ext = integrate_extremal(spec, x, p0, t_max, opts)?;
            let t_reached = match ext.status {
                ExtremalStatus::Completed => t_max,
                ExtremalStatus::Escaped { t } | ExtremalStatus::StepFailure { t } => t,
            };
            Ok(DirectionOutcome {
                p0: p0.as_slice().to_vec(),
                status: ext.status,
                t_reached,
                max_drift: ext.max_drift,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let completed: Vec<&DirectionOutcome> =
        directions.iter().filter(|d| d.status == ExtremalStatus::Completed).collect();
    let max_drift = completed.iter().map(|d| d.max_drift).fold(0.0, f64::max);
    Ok(CompletenessReport {
        x: x.to_vec(),
        t_max,
        completed: completed.len(),
        fraction_extendable: completed.len() as f64 / n_dirs as f64,
        max_drift,
        directions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::norm::MinkowskiNorm;
    use crate::spec::Domain;
    use approx::assert_relative_eq;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    fn plane() -> ManifoldSpec {
        ManifoldSpec::flat(2, Domain::Unbounded, MinkowskiNorm::euclidean(2)).unwrap()
    }

    fn disk() -> ManifoldSpec {
        let domain = Domain::Ball { center: vec![0.0, 0.0], radius: 1.0 };
        ManifoldSpec::flat(2, domain, MinkowskiNorm::euclidean(2)).unwrap()
    }

    #[test]
    fn euclidean_rhs() {
        let s = ExtremalState { x: vec![1.0, 2.0], p: vec![3.0, -4.0] };
        let (dx, dp) = hamiltonian_rhs(&plane(), &s).unwrap();
        assert_eq!(dx, v(&[3.0, -4.0]));
        assert_eq!(dp, v(&[0.0, 0.0]));
    }

    #[test]
    fn heisenberg_rhs_at_origin() {
        let s = ExtremalState { x: vec![0.0; 3], p: vec![1.0, 0.0, 0.0] };
        let (dx, dp) = hamiltonian_rhs(&ManifoldSpec::heisenberg(), &s).unwrap();
        assert_eq!(dx, v(&[1.0, 0.0, 0.0]));
        assert_eq!(dp, v(&[0.0, 0.0, 0.0]));
    }

    #[test]
    fn euclidean_extremal_is_a_line() {
        let ext = integrate_extremal(&plane(), &[0.0, 0.0], &v(&[1.0, 0.0]), 1.0, &IntegrateOptions::default()).unwrap();
        assert_eq!(ext.status, ExtremalStatus::Completed);
        assert_relative_eq!(ext.final_state.x[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(ext.final_state.x[1], 0.0, epsilon = 1e-12);
        assert!(ext.max_drift <= 1e-12);
        assert_eq!(ext.samples.len(), MIN_SAMPLES);
        assert_eq!(ext.samples.last().unwrap().t, 1.0);
    }

    #[test]
    fn heisenberg_horizontal_line() {
        let spec = ManifoldSpec::heisenberg();
        let ext = integrate_extremal(&spec, &[0.0; 3], &v(&[1.0, 0.0, 0.0]), 1.0, &IntegrateOptions::default()).unwrap();
        assert_eq!(ext.status, ExtremalStatus::Completed);
        assert_relative_eq!(v(&ext.final_state.x), v(&[1.0, 0.0, 0.0]), epsilon = 1e-12);
    }

    #[test]
    fn escape_from_unit_disk() {
        let ext = integrate_extremal(&disk(), &[0.9, 0.0], &v(&[1.0, 0.0]), 1.0, &IntegrateOptions::default()).unwrap();
        match ext.status {
            ExtremalStatus::Escaped { t } => assert!((t - 0.1).abs() < 1e-9, "t = {t}"),
            other => panic!("{other:?}"),
        }
        assert!(ext.samples.iter().all(|s| disk().contains(&s.x)));
        assert!(matches!(
            exp_star(&disk(), &[0.9, 0.0], &v(&[1.0, 0.0])),
            Err(Error::OutsideDomainOfExp { .. })
        ));
    }

    #[test]
    fn invalid_starts() {
        assert!(matches!(
            integrate_extremal(&disk(), &[2.0, 0.0], &v(&[1.0, 0.0]), 1.0, &IntegrateOptions::default()),
            Err(Error::Domain(_))
        ));
        assert!(integrate_extremal(&plane(), &[0.0, 0.0], &v(&[1.0, 0.0]), 0.0, &IntegrateOptions::default()).is_err());
    }

    #[test]
    fn exp_star_examples() {
        assert_relative_eq!(v(&exp_star(&plane(), &[0.0, 0.0], &v(&[3.0, 4.0])).unwrap()), v(&[3.0, 4.0]), epsilon = 1e-12);
        let spec = ManifoldSpec::heisenberg();
        assert_eq!(exp_star(&spec, &[0.0; 3], &v(&[0.0, 0.0, 2.5])).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn exp_map_on_the_plane() {
        let y = exp_map(&plane(), &[1.0, 1.0], &v(&[0.5, -2.0])).unwrap();
        assert_relative_eq!(v(&y), v(&[1.5, -1.0]), epsilon = 1e-12);
        assert_eq!(exp_map(&plane(), &[1.0, 1.0], &v(&[0.0, 0.0])), Err(Error::ZeroVector));
    }

    #[test]
    fn jacobian_examples() {
        let j = jacobian_exp_star(&plane(), &[0.0, 0.0], &v(&[0.3, 0.7])).unwrap();
        assert_relative_eq!(j, DMatrix::identity(2, 2), epsilon = 1e-8);
        let spec = ManifoldSpec::heisenberg();
        assert_eq!(jacobian_exp_star(&spec, &[0.0; 3], &v(&[0.0, 0.0, 1.0])), Err(Error::ZeroVector));
    }

    #[test]
    fn sampled_covectors_lie_on_the_dual_sphere() {
        let spec = ManifoldSpec::heisenberg();
        let ps = sample_covectors(&spec, &[0.2, -0.1, 0.0], 1.5, 20, 7, DEFAULT_MIN_FIBER_FRACTION).unwrap();
        for p in &ps {
            let h = crate::duality::sub_hamiltonian(&spec, &[0.2, -0.1, 0.0], p).unwrap();
            assert_relative_eq!((2.0 * h).sqrt(), 1.5, epsilon = 1e-12);
        }
        assert_eq!(ps, sample_covectors(&spec, &[0.2, -0.1, 0.0], 1.5, 20, 7, DEFAULT_MIN_FIBER_FRACTION).unwrap());
    }

    #[test]
    fn completeness_examples() {
        let opts = IntegrateOptions::default();
        let r = completeness_probe(&plane(), &[0.0, 0.0], 16, 100.0, 0, &opts).unwrap();
        assert_eq!(r.completed, 16);
        let r = completeness_probe(&disk(), &[0.0, 0.0], 16, 100.0, 0, &opts).unwrap();
        assert_eq!(r.completed, 0);
        assert_eq!(r.fraction_extendable, 0.0);
        for d in &r.directions {
            assert!((d.t_reached - 1.0).abs() < 1e-9);
        }
    }
}
