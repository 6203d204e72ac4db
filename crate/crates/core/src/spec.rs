//! Manifold specifications: a single chart, a frame of the distribution and a
//! fiber norm, loaded from JSON.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::expr::{parse_expr, Expr};
use crate::linalg::numerical_rank;
use crate::norm::MinkowskiNorm;

/// Number of random points at which the frame rank is checked on load.
const RANK_SAMPLES: usize = 32;
const RANK_TOL: f64 = 1e-9;

/// Region of `ℝⁿ` covered by the chart.
#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    Unbounded,
    /// Axis-aligned open box.
    Box { min: Vec<f64>, max: Vec<f64> },
    /// Open Euclidean ball.
    Ball { center: Vec<f64>, radius: f64 },
}

impl Domain {
    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Domain::Unbounded => x.iter().all(|v| v.is_finite()),
            Domain::Box { min, max } => x
                .iter()
                .zip(min.iter().zip(max))
                .all(|(v, (lo, hi))| *v > *lo && *v < *hi),
            Domain::Ball { center, radius } => {
                let d2: f64 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
                d2 < radius * radius
            }
        }
    }

    /// Uniform sample; the unbounded chart is sampled on `[-1, 1]ⁿ`.
    pub fn sample<R: Rng>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        match self {
            Domain::Unbounded => (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
            Domain::Box { min, max } => min
                .iter()
                .zip(max)
                .map(|(lo, hi)| lo + (hi - lo) * rng.random::<f64>())
                .collect(),
            Domain::Ball { center, radius } => loop {
                let x: Vec<f64> = center
                    .iter()
                    .map(|c| c + radius * rng.random_range(-1.0..1.0))
                    .collect();
                if self.contains(&x) {
                    break x;
                }
            },
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        match self {
            Domain::Unbounded => Ok(()),
            Domain::Box { min, max } => {
                if min.len() != n || max.len() != n {
                    return Err(Error::Validation(format!("domain bounds must have {n} entries")));
                }
                if min.iter().zip(max).any(|(lo, hi)| !(lo < hi)) {
                    return Err(Error::Validation("domain box has zero volume".into()));
                }
                Ok(())
            }
            Domain::Ball { center, radius } => {
                if center.len() != n {
                    return Err(Error::Validation(format!("domain center must have {n} entries")));
                }
                if !(*radius > 0.0) || !radius.is_finite() {
                    return Err(Error::Validation("domain radius must be positive".into()));
                }
                Ok(())
            }
        }
    }
}

/// A sub-Finsler structure on a chart: `dim`, the frame `X₁..X_k` spanning
/// the distribution, and a Minkowski norm on the frame coordinates.
#[derive(Debug, Clone)]
pub struct ManifoldSpec {
    dim: usize,
    domain: Domain,
    frames: Vec<Vec<Expr>>,
    /// `jacobians[a][m][i] = ∂(X_a)^m / ∂x^i`.
    jacobians: Vec<Vec<Vec<Expr>>>,
    /// Nonzero entries of `jacobians` as `(a, m, i, ∂_i X_a^m)`.
    jacobian_terms: Vec<(usize, usize, usize, Expr)>,
    norm: MinkowskiNorm,
}

/// Replaces an expression without variables by its value.
fn fold_constant(e: &Expr) -> Expr {
    match e.max_var() {
        None => e.eval(&[]).map(Expr::Num).unwrap_or_else(|_| e.clone()),
        Some(_) => e.clone(),
    }
}

impl ManifoldSpec {
    pub fn new(dim: usize, domain: Domain, frames: Vec<Vec<Expr>>, norm: MinkowskiNorm) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Validation("dimension must be at least 1".into()));
        }
        let k = frames.len();
        if k == 0 || k > dim {
            return Err(Error::Validation(format!("need 1 <= k <= n frames, got k = {k}, n = {dim}")));
        }
        for (a, frame) in frames.iter().enumerate() {
            if frame.len() != dim {
                return Err(Error::Validation(format!(
                    "frame {} has {} components, expected {dim}",
                    a + 1,
                    frame.len()
                )));
            }
            if let Some(i) = frame.iter().filter_map(Expr::max_var).max() {
                if i >= dim {
                    return Err(Error::Validation(format!(
                        "frame {} references x{} outside a {dim}-dimensional chart",
                        a + 1,
                        i + 1
                    )));
                }
            }
        }
        if norm.dim() != k {
            return Err(Error::Validation(format!(
                "norm acts on {} fiber coordinates but the frame has {k} fields",
                norm.dim()
            )));
        }
        domain.validate(dim)?;
        let jacobians: Vec<Vec<Vec<Expr>>> = frames
            .iter()
            .map(|frame| frame.iter().map(|c| (0..dim).map(|i| c.diff(i)).collect()).collect())
            .collect();
        let jacobian_terms = jacobians
            .iter()
            .enumerate()
            .flat_map(|(a, jac)| {
                jac.iter().enumerate().flat_map(move |(m, comps)| {
                    comps.iter().enumerate().filter(|(_, d)| !d.is_zero()).map(move |(i, d)| (a, m, i, fold_constant(d)))
                })
            })
            .collect();
        let spec = ManifoldSpec { dim, domain, frames, jacobians, jacobian_terms, norm };
        spec.check_rank()?;
        Ok(spec)
    }

    fn check_rank(&self) -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..RANK_SAMPLES {
            let x = self.domain.sample(self.dim, &mut rng);
            let a = self.frame_matrix_unchecked(&x).map_err(|e| {
                Error::Validation(format!("frame cannot be evaluated at sampled point {x:?}: {e}"))
            })?;
            if numerical_rank(&a, RANK_TOL) < self.k() {
                return Err(Error::Validation(format!("frame matrix is rank deficient at {x:?}")));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Rank of the distribution.
    pub fn k(&self) -> usize {
        self.frames.len()
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn frames(&self) -> &[Vec<Expr>] {
        &self.frames
    }

    pub fn norm(&self) -> &MinkowskiNorm {
        &self.norm
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim && self.domain.contains(x)
    }

    pub(crate) fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::Domain(format!("point has {} coordinates, expected {}", x.len(), self.dim)));
        }
        if !self.domain.contains(x) {
            return Err(Error::Domain(format!("point {x:?} lies outside the chart domain")));
        }
        Ok(())
    }

    /// Writes the frame matrix column-major into `out` (length `n·k`).
    pub(crate) fn frame_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        for (o, c) in out.iter_mut().zip(self.frames.iter().flatten()) {
            *o = c.eval(x)?;
        }
        Ok(())
    }

    /// Frame matrix without the domain check; columns are `X_a(x)`.
    pub(crate) fn frame_matrix_unchecked(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let mut a = DMatrix::zeros(self.dim, self.k());
        for (col, frame) in self.frames.iter().enumerate() {
            for (row, c) in frame.iter().enumerate() {
                a[(row, col)] = c.eval(x)?;
            }
        }
        Ok(a)
    }

    /// Adds `−Σ_a w_a ⟨p, ∂_i X_a(x)⟩` to `dp_i`.
    pub(crate) fn accumulate_costate(&self, x: &[f64], p: &[f64], w: &[f64], dp: &mut [f64]) -> Result<()> {
        for (a, m, i, d) in &self.jacobian_terms {
            dp[*i] -= w[*a] * p[*m] * d.eval(x)?;
        }
        Ok(())
    }

    /// `∂_i X_a(x)` as an `n×n` matrix per frame field (row = component, column = variable).
    pub(crate) fn frame_jacobians_unchecked(&self, x: &[f64]) -> Result<Vec<DMatrix<f64>>> {
        self.jacobians
            .iter()
            .map(|jac| {
                let mut m = DMatrix::zeros(self.dim, self.dim);
                for (row, comps) in jac.iter().enumerate() {
                    for (col, d) in comps.iter().enumerate() {
                        if !d.is_zero() {
                            m[(row, col)] = d.eval(x)?;
                        }
                    }
                }
                Ok(m)
            })
            .collect()
    }

    /// The Heisenberg group: `X₁ = ∂x − (y/2)∂z`, `X₂ = ∂y + (x/2)∂z` with the Euclidean fiber norm.
    pub fn heisenberg() -> Self {
        Self::from_strings(3, Domain::Unbounded, &[&["1", "0", "-y/2"], &["0", "1", "x/2"]], MinkowskiNorm::euclidean(2))
            .expect("Heisenberg structure is valid")
    }

    /// Flat `ℝⁿ` with the coordinate frame and the given norm on all of `ℝⁿ`.
    pub fn flat(n: usize, domain: Domain, norm: MinkowskiNorm) -> Result<Self> {
        let frames = (0..n)
            .map(|a| (0..n).map(|i| Expr::Num(if a == i { 1.0 } else { 0.0 })).collect())
            .collect();
        ManifoldSpec::new(n, domain, frames, norm)
    }

    /// `span{∂x, ∂y}` in `ℝ³`: involutive, never bracket generating.
    pub fn involutive_plane() -> Self {
        Self::from_strings(3, Domain::Unbounded, &[&["1", "0", "0"], &["0", "1", "0"]], MinkowskiNorm::euclidean(2))
            .expect("involutive structure is valid")
    }

    pub fn from_strings(dim: usize, domain: Domain, frames: &[&[&str]], norm: MinkowskiNorm) -> Result<Self> {
        let frames = frames
            .iter()
            .map(|f| f.iter().map(|s| parse_expr(s)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        ManifoldSpec::new(dim, domain, frames, norm)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecDoc {
    dim: usize,
    #[serde(default)]
    domain: Option<DomainDoc>,
    frames: Vec<Vec<String>>,
    norm: NormDoc,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum DomainDoc {
    Box(BoxDoc),
    Ball(BallDoc),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BoxDoc {
    min: Vec<f64>,
    max: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BallDoc {
    center: Vec<f64>,
    radius: f64,
}

#[derive(Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
enum NormDoc {
    Euclidean {},
    Quadratic {
        #[serde(rename = "G")]
        g: Vec<Vec<f64>>,
    },
    Randers {
        #[serde(rename = "G")]
        g: Vec<Vec<f64>>,
        b: Vec<f64>,
    },
}

fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let k = rows.len();
    if rows.iter().any(|r| r.len() != k) {
        return Err(Error::Validation("quadratic form must be a square matrix".into()));
    }
    Ok(DMatrix::from_fn(k, k, |i, j| rows[i][j]))
}

/// Parses and validates a JSON manifold document.
pub fn parse_manifold_spec(document: &str) -> Result<ManifoldSpec> {
    let doc: SpecDoc = serde_json::from_str(document).map_err(|e| Error::Schema(e.to_string()))?;
    let k = doc.frames.len();
    let norm = match doc.norm {
        NormDoc::Euclidean {} => MinkowskiNorm::euclidean(k),
        NormDoc::Quadratic { g } => MinkowskiNorm::quadratic(matrix_from_rows(&g)?)?,
        NormDoc::Randers { g, b } => {
            MinkowskiNorm::randers(matrix_from_rows(&g)?, DVector::from_vec(b))?
        }
    };
    let domain = match doc.domain {
        None => Domain::Unbounded,
        Some(DomainDoc::Box(b)) => Domain::Box { min: b.min, max: b.max },
        Some(DomainDoc::Ball(b)) => Domain::Ball { center: b.center, radius: b.radius },
    };
    let frames = doc
        .frames
        .iter()
        .enumerate()
        .map(|(a, frame)| {
            frame
                .iter()
                .enumerate()
                .map(|(i, src)| {
                    parse_expr(src).map_err(|e| {
                        Error::Validation(format!("frame {} component {}: {e}", a + 1, i + 1))
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    ManifoldSpec::new(doc.dim, domain, frames, norm)
}
