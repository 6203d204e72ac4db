//! Legendre duality between horizontal velocities and covectors.
//!
//! Covectors `p ∈ ℝⁿ` are reduced to fiber momenta `u = A(x)ᵀp ∈ ℝᵏ`; all
//! dual objects (`F*`, `H`, `g*`) are computed from the primal norm by
//! inverting the fiber derivative `w ↦ ∇(F²/2)(w)` with a damped Newton
//! iteration, so every norm in the catalogue goes through the same path.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::norm::{MinkowskiNorm, NormKind};
use crate::spec::ManifoldSpec;

const NEWTON_MAX_ITER: usize = 50;
const NEWTON_TOL: f64 = 1e-10;

/// Frame coordinates `u_a = ⟨p, X_a(x)⟩` of a covector restricted to the distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct FiberMomentum(pub DVector<f64>);

impl FiberMomentum {
    pub fn as_vector(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0.0)
    }
}

fn is_zero(v: &DVector<f64>) -> bool {
    v.iter().all(|&c| c == 0.0)
}

/// `u = A(x)ᵀ p`.
pub fn reduce_covector(spec: &ManifoldSpec, x: &[f64], p: &DVector<f64>) -> Result<FiberMomentum> {
    spec.check_point(x)?;
    check_covector(spec, p)?;
    let a = spec.frame_matrix_unchecked(x)?;
    Ok(FiberMomentum(a.transpose() * p))
}

pub(crate) fn check_covector(spec: &ManifoldSpec, p: &DVector<f64>) -> Result<()> {
    if p.len() != spec.dim() {
        return Err(Error::InvalidArgument(format!(
            "covector has {} components, expected {}",
            p.len(),
            spec.dim()
        )));
    }
    Ok(())
}

/// Sub-Lagrangian `L(w) = F(w)²/2`.
pub fn lagrangian(norm: &MinkowskiNorm, w: &DVector<f64>) -> f64 {
    0.5 * norm.value(w).powi(2)
}

/// Fiber derivative `u = ∇L(w)`.
pub fn legendre_fiber_fwd(norm: &MinkowskiNorm, w: &DVector<f64>) -> Result<FiberMomentum> {
    Ok(FiberMomentum(norm.eval(w)?.grad))
}

/// The unique `w` with `∇L(w) = u`.
pub fn legendre_fiber_inv(norm: &MinkowskiNorm, u: &FiberMomentum) -> Result<DVector<f64>> {
    invert_fiber_derivative(norm, &u.0)
}

pub(crate) fn invert_fiber_derivative(norm: &MinkowskiNorm, u: &DVector<f64>) -> Result<DVector<f64>> {
    if is_zero(u) {
        return Err(Error::ZeroVector);
    }
    match norm.kind() {
        NormKind::Euclidean => return Ok(u.clone()),
        NormKind::Quadratic { .. } => {
            if let Some(g_inv) = norm.g_inverse() {
                return Ok(g_inv * u);
            }
        }
        NormKind::Randers { .. } => {}
    }
    let scale = 1.0 + u.norm();
    let tol = NEWTON_TOL * scale;
    let floor = 8.0 * f64::EPSILON * scale;

    // Exact for the quadratic norms; a good start for Randers.
    let mut w = match norm.g_inverse() {
        Some(g_inv) => g_inv * u,
        None => u.clone(),
    };
    let objective = |w: &DVector<f64>| lagrangian(norm, w) - u.dot(w);

    let mut residual = f64::INFINITY;
    let mut polished = false;
    for _ in 0..NEWTON_MAX_ITER {
        let e = norm.eval(&w)?;
        let r = &e.grad - u;
        residual = r.norm();
        if residual <= floor || (residual <= tol && polished) {
            return Ok(w);
        }
        if residual <= tol {
            polished = true;
        }
        let Some(chol) = e.hess.cholesky() else {
            break;
        };
        let step = -chol.solve(&r);
        let slope = r.dot(&step);
        let phi0 = objective(&w);
        let mut t = 1.0;
        let mut accepted = false;
        while t > 1e-12 {
            let trial = &w + &step * t;
            if !is_zero(&trial) {
                if let Ok(te) = norm.eval(&trial) {
                    let armijo = objective(&trial) <= phi0 + 1e-4 * t * slope;
                    if armijo || (&te.grad - u).norm() < residual {
                        w = trial;
                        accepted = true;
                        break;
                    }
                }
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if residual <= tol {
        return Ok(w);
    }
    Err(Error::NoConvergence { iterations: NEWTON_MAX_ITER, residual })
}

/// `H(u) = u·w − L(w)` at `w = 𝓛_H(u)`, with `H(0) = 0`.
pub fn fiber_hamiltonian(norm: &MinkowskiNorm, u: &DVector<f64>) -> Result<f64> {
    if is_zero(u) {
        return Ok(0.0);
    }
    let w = invert_fiber_derivative(norm, u)?;
    Ok((u.dot(&w) - lagrangian(norm, &w)).max(0.0))
}

/// Dual norm `F*(u) = sup_{F(w)=1} u·w`, evaluated as `sqrt(2H(u))`.
pub fn dual_norm(norm: &MinkowskiNorm, u: &FiberMomentum) -> Result<f64> {
    if u.is_zero() {
        return Err(Error::ZeroVector);
    }
    Ok((2.0 * fiber_hamiltonian(norm, &u.0)?).sqrt())
}

/// Sub-Hamiltonian `H(x, p) = ½F*(A(x)ᵀp)²`; zero on the annihilator.
pub fn sub_hamiltonian(spec: &ManifoldSpec, x: &[f64], p: &DVector<f64>) -> Result<f64> {
    let u = reduce_covector(spec, x, p)?;
    fiber_hamiltonian(spec.norm(), &u.0)
}

/// Hessian of `H` in fiber-momentum coordinates.
pub fn fiber_g_star(norm: &MinkowskiNorm, u: &DVector<f64>) -> Result<DMatrix<f64>> {
    if is_zero(u) {
        return Err(Error::ZeroVector);
    }
    let k = norm.dim();
    match norm.kind() {
        NormKind::Euclidean => Ok(DMatrix::identity(k, k)),
        NormKind::Quadratic { .. } => Ok(norm.g_inverse().expect("quadratic norm caches G⁻¹").clone()),
        NormKind::Randers { .. } => {
            // Central differences of ∇H = 𝓛_H.
            let h = f64::EPSILON.cbrt() * (1.0 + u.norm());
            let mut m = DMatrix::zeros(k, k);
            for j in 0..k {
                let mut up = u.clone();
                let mut um = u.clone();
                up[j] += h;
                um[j] -= h;
                let col = (invert_fiber_derivative(norm, &up)? - invert_fiber_derivative(norm, &um)?) / (2.0 * h);
                m.set_column(j, &col);
            }
            Ok((&m + m.transpose()) * 0.5)
        }
    }
}

/// `g*` at `(x, p)`, a `k×k` symmetric positive-definite matrix.
pub fn g_star(spec: &ManifoldSpec, x: &[f64], p: &DVector<f64>) -> Result<DMatrix<f64>> {
    let u = reduce_covector(spec, x, p)?;
    fiber_g_star(spec.norm(), &u.0)
}

/// Vectors `Y₁..Y_k` with `½Σ(u·Y_i)² = ½uᵀg*u`: Gram–Schmidt of the
/// standard fiber basis, in index order, under `(g*)⁻¹`.
pub fn orthonormal_coframe(spec: &ManifoldSpec, x: &[f64], p: &DVector<f64>) -> Result<Vec<DVector<f64>>> {
    let gs = g_star(spec, x, p)?;
    let metric = gs
        .cholesky()
        .ok_or_else(|| Error::Domain("g* is not positive-definite".into()))?
        .inverse();
    let k = spec.k();
    let inner = |a: &DVector<f64>, b: &DVector<f64>| a.dot(&(&metric * b));
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(k);
    for i in 0..k {
        let mut v = DVector::zeros(k);
        v[i] = 1.0;
        for y in &basis {
            let c = inner(&v, y);
            v -= y * c;
        }
        let len = inner(&v, &v).sqrt();
        basis.push(v / len);
    }
    Ok(basis)
}

/// `½Σ_i (u·Y_i)²` for the coframe at `(x, p)`.
pub fn coframe_hamiltonian(spec: &ManifoldSpec, x: &[f64], p: &DVector<f64>) -> Result<f64> {
    let u = reduce_covector(spec, x, p)?;
    let frame = orthonormal_coframe(spec, x, p)?;
    Ok(0.5 * frame.iter().map(|y| u.0.dot(y).powi(2)).sum::<f64>())
}
