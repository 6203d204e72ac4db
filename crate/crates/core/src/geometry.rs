//! Frames, Lie brackets, the bracket-generating test and curve functionals.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::{self, Expr};
use crate::linalg::numerical_rank;
use crate::spec::ManifoldSpec;

/// Default relative tolerance on singular values for the numerical rank.
pub const DEFAULT_RANK_TOL: f64 = 1e-9;

/// `n×k` matrix whose columns are `X₁(x), …, X_k(x)`.
pub fn frame_matrix(spec: &ManifoldSpec, x: &[f64]) -> Result<DMatrix<f64>> {
    spec.check_point(x)?;
    spec.frame_matrix_unchecked(x)
}

/// `[X_i, X_j](x) = DX_j·X_i − DX_i·X_j`, with 0-based frame indices.
pub fn lie_bracket(spec: &ManifoldSpec, i: usize, j: usize, x: &[f64]) -> Result<DVector<f64>> {
    spec.check_point(x)?;
    let k = spec.k();
    if i >= k || j >= k {
        return Err(Error::InvalidArgument(format!("frame index out of range (k = {k})")));
    }
    let a = spec.frame_matrix_unchecked(x)?;
    let jac = spec.frame_jacobians_unchecked(x)?;
    let along_i = &jac[j] * a.column(i);
    let along_j = &jac[i] * a.column(j);
    Ok(along_i - along_j)
}

/// Outcome of the bracket-generating test at one point.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BracketReport {
    pub generating: bool,
    /// Entry `d` is the rank of all brackets of length `≤ d + 1`.
    pub growth_vector: Vec<usize>,
}

type VectorField = Vec<Expr>;

/// Symbolic bracket of two vector fields given by their components.
fn bracket_fields(v: &VectorField, w: &VectorField) -> VectorField {
    let n = v.len();
    (0..n)
        .map(|m| {
            let mut acc = Expr::Num(0.0);
            for i in 0..n {
                let dw = w[m].diff(i);
                if !dw.is_zero() && !v[i].is_zero() {
                    acc = expr::add(acc, expr::mul(dw, v[i].clone()));
                }
                let dv = v[m].diff(i);
                if !dv.is_zero() && !w[i].is_zero() {
                    acc = expr::sub(acc, expr::mul(dv, w[i].clone()));
                }
            }
            acc
        })
        .collect()
}

/// Ranks of the iterated-bracket flag at `x`, up to brackets of length
/// `max_depth`. Stops early once the full dimension is reached.
pub fn bracket_generating(spec: &ManifoldSpec, x: &[f64], max_depth: usize, rank_tol: f64) -> Result<BracketReport> {
    if max_depth == 0 {
        return Err(Error::InvalidArgument("max_depth must be at least 1".into()));
    }
    spec.check_point(x)?;
    let n = spec.dim();
    let frames: Vec<VectorField> = spec.frames().to_vec();

    let mut columns: Vec<DVector<f64>> = Vec::new();
    let mut level: Vec<VectorField> = frames.clone();
    let mut growth = Vec::with_capacity(max_depth);
    for depth in 0..max_depth {
        if depth > 0 {
            // Right-normed brackets [X_a, B] with B of the previous length span the next layer.
            let mut next = Vec::new();
            for (a, xa) in frames.iter().enumerate() {
                for (b, field) in level.iter().enumerate() {
                    if depth == 1 && a >= b {
                        continue;
                    }
                    let br = bracket_fields(xa, field);
                    if br.iter().any(|c| !c.is_zero()) {
                        next.push(br);
                    }
                }
            }
            level = next;
        }
        for field in &level {
            let col = field.iter().map(|c| c.eval(x)).collect::<Result<Vec<f64>>>()?;
            columns.push(DVector::from_vec(col));
        }
        let rank = if columns.is_empty() {
            0
        } else {
            numerical_rank(&DMatrix::from_columns(&columns), rank_tol)
        };
        growth.push(rank);
        if rank == n {
            break;
        }
    }
    let generating = growth.last() == Some(&n);
    Ok(BracketReport { generating, growth_vector: growth })
}

/// A sampled horizontal curve; `velocities[j]` are the frame coordinates of
/// the velocity at `times[j]`, so `ẋ = Σ_a w_a X_a(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HorizontalPolyline {
    times: Vec<f64>,
    points: Vec<Vec<f64>>,
    velocities: Vec<DVector<f64>>,
}

impl HorizontalPolyline {
    pub fn new(times: Vec<f64>, points: Vec<Vec<f64>>, velocities: Vec<DVector<f64>>) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::InvalidArgument("polyline has no samples".into()));
        }
        if points.len() != times.len() || velocities.len() != times.len() {
            return Err(Error::InvalidArgument("polyline sample arrays differ in length".into()));
        }
        if times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidArgument("polyline times must be strictly increasing".into()));
        }
        Ok(HorizontalPolyline { times, points, velocities })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn velocities(&self) -> &[DVector<f64>] {
        &self.velocities
    }

    pub fn duration(&self) -> f64 {
        self.times[self.times.len() - 1] - self.times[0]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurveFunctionals {
    pub length: f64,
    pub energy: f64,
}

/// Length `∫F(w)` and energy `½∫F(w)²` by the composite trapezoid rule.
pub fn curve_functionals(spec: &ManifoldSpec, curve: &HorizontalPolyline) -> Result<CurveFunctionals> {
    let norm = spec.norm();
    let mut speeds = Vec::with_capacity(curve.times.len());
    for (x, w) in curve.points.iter().zip(&curve.velocities) {
        spec.check_point(x)?;
        if w.len() != spec.k() {
            return Err(Error::InvalidArgument(format!("velocity must have {} frame coordinates", spec.k())));
        }
        if w.iter().all(|&c| c == 0.0) {
            return Err(Error::ZeroVector);
        }
        speeds.push(norm.value(w));
    }
    let mut length = 0.0;
    let mut energy = 0.0;
    for j in 1..speeds.len() {
        let dt = curve.times[j] - curve.times[j - 1];
        length += 0.5 * dt * (speeds[j - 1] + speeds[j]);
        energy += 0.25 * dt * (speeds[j - 1].powi(2) + speeds[j].powi(2));
    }
    Ok(CurveFunctionals { length, energy })
}
