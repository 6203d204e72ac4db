//! Minkowski norms on the fiber coordinates of the distribution.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Catalogue of smooth strongly convex fiber norms.
#[derive(Debug, Clone, PartialEq)]
pub enum NormKind {
    /// `F(w) = |w|`.
    Euclidean,
    /// `F(w) = sqrt(wᵀGw)` with `G` symmetric positive-definite.
    Quadratic { g: DMatrix<f64> },
    /// `F(w) = sqrt(wᵀGw) + b·w` with `bᵀG⁻¹b < 1`.
    Randers { g: DMatrix<f64>, b: DVector<f64> },
}

/// A positively homogeneous, strongly convex norm on `ℝᵏ`.
#[derive(Debug, Clone, PartialEq)]
pub struct MinkowskiNorm {
    kind: NormKind,
    dim: usize,
    g_inv: Option<DMatrix<f64>>,
}

/// Value of `F` together with the gradient and Hessian of `F²/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormEval {
    pub value: f64,
    pub grad: DVector<f64>,
    pub hess: DMatrix<f64>,
}

fn check_spd(g: &DMatrix<f64>, k: usize) -> Result<DMatrix<f64>> {
    if g.nrows() != k || g.ncols() != k {
        return Err(Error::Validation(format!(
            "quadratic form must be {k}x{k}, got {}x{}",
            g.nrows(),
            g.ncols()
        )));
    }
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation("quadratic form has non-finite entries".into()));
    }
    let scale = g.amax().max(f64::MIN_POSITIVE);
    if (g - g.transpose()).amax() > 1e-12 * scale {
        return Err(Error::Validation("quadratic form is not symmetric".into()));
    }
    let chol = g
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Validation("quadratic form is not positive-definite".into()))?;
    Ok(chol.inverse())
}

impl MinkowskiNorm {
    pub fn euclidean(dim: usize) -> Self {
        MinkowskiNorm { kind: NormKind::Euclidean, dim, g_inv: None }
    }

    pub fn quadratic(g: DMatrix<f64>) -> Result<Self> {
        let dim = g.nrows();
        let g_inv = check_spd(&g, dim)?;
        Ok(MinkowskiNorm { kind: NormKind::Quadratic { g }, dim, g_inv: Some(g_inv) })
    }

    pub fn randers(g: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        let dim = g.nrows();
        let g_inv = check_spd(&g, dim)?;
        if b.len() != dim {
            return Err(Error::Validation(format!("drift must have {dim} components, got {}", b.len())));
        }
        let b_sq = b.dot(&(&g_inv * &b));
        if !(b_sq < 1.0) {
            return Err(Error::Validation(format!(
                "Randers drift has |b|_G = {} >= 1; strong convexity fails",
                b_sq.sqrt()
            )));
        }
        Ok(MinkowskiNorm { kind: NormKind::Randers { g, b }, dim, g_inv: Some(g_inv) })
    }

    pub fn kind(&self) -> &NormKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `F(w) = F(-w)` for all `w`.
    pub fn is_reversible(&self) -> bool {
        match &self.kind {
            NormKind::Randers { b, .. } => b.iter().all(|&v| v == 0.0),
            _ => true,
        }
    }

    /// Inverse of the quadratic part (`None` for the Euclidean norm).
    pub fn g_inverse(&self) -> Option<&DMatrix<f64>> {
        self.g_inv.as_ref()
    }

    /// Norm value; continuous extension `F(0) = 0`.
    pub fn value(&self, w: &DVector<f64>) -> f64 {
        match &self.kind {
            NormKind::Euclidean => w.norm(),
            NormKind::Quadratic { g } => w.dot(&(g * w)).max(0.0).sqrt(),
            NormKind::Randers { g, b } => w.dot(&(g * w)).max(0.0).sqrt() + b.dot(w),
        }
    }

    /// `F`, `∇(F²/2)` and `∇²(F²/2)` at `w ≠ 0`.
    pub fn eval(&self, w: &DVector<f64>) -> Result<NormEval> {
        if w.iter().all(|&v| v == 0.0) {
            return Err(Error::ZeroVector);
        }
        let k = self.dim;
        Ok(match &self.kind {
            NormKind::Euclidean => NormEval {
                value: w.norm(),
                grad: w.clone(),
                hess: DMatrix::identity(k, k),
            },
            NormKind::Quadratic { g } => {
                let gw = g * w;
                NormEval { value: w.dot(&gw).sqrt(), grad: gw, hess: g.clone() }
            }
            NormKind::Randers { g, b } => {
                let gw = g * w;
                let alpha = w.dot(&gw).sqrt();
                let value = alpha + b.dot(w);
                let grad_f = &gw / alpha + b;
                let hess_f = (g - &gw * gw.transpose() / (alpha * alpha)) / alpha;
                NormEval {
                    value,
                    grad: &grad_f * value,
                    hess: &grad_f * grad_f.transpose() + hess_f * value,
                }
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    #[test]
    fn values() {
        assert_eq!(MinkowskiNorm::euclidean(2).value(&v(&[3.0, 4.0])), 5.0);
        let q = MinkowskiNorm::quadratic(DMatrix::from_diagonal(&v(&[4.0, 1.0]))).unwrap();
        assert_eq!(q.value(&v(&[1.0, 0.0])), 2.0);
        let r = MinkowskiNorm::randers(DMatrix::identity(2, 2), v(&[0.5, 0.0])).unwrap();
        assert_eq!(r.value(&v(&[1.0, 0.0])), 1.5);
        assert_eq!(r.value(&v(&[-1.0, 0.0])), 0.5);
        assert!(!r.is_reversible());
        assert!(q.is_reversible());
    }

    #[test]
    fn zero_vector_rejected() {
        let n = MinkowskiNorm::euclidean(2);
        assert_eq!(n.eval(&v(&[0.0, 0.0])), Err(Error::ZeroVector));
        assert_eq!(n.value(&v(&[0.0, 0.0])), 0.0);
    }

    #[test]
    fn invalid_parameters() {
        let g = DMatrix::identity(2, 2);
        assert!(matches!(MinkowskiNorm::randers(g.clone(), v(&[1.2, 0.0])), Err(Error::Validation(_))));
        assert!(matches!(MinkowskiNorm::randers(g.clone(), v(&[1.0, 0.0])), Err(Error::Validation(_))));
        assert!(matches!(MinkowskiNorm::randers(g, v(&[0.1])), Err(Error::Validation(_))));
        let indefinite = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(matches!(MinkowskiNorm::quadratic(indefinite), Err(Error::Validation(_))));
        let asym = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 0.0, 2.0]);
        assert!(matches!(MinkowskiNorm::quadratic(asym), Err(Error::Validation(_))));
    }

    #[test]
    fn randers_derivatives_match_finite_differences() {
        let g = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        let norm = MinkowskiNorm::randers(g, v(&[0.4, -0.2])).unwrap();
        let w = v(&[0.7, -1.3]);
        let e = norm.eval(&w).unwrap();
        let half_sq = |w: &DVector<f64>| 0.5 * norm.value(w).powi(2);
        let h = 1e-5;
        for i in 0..2 {
            let mut wp = w.clone();
            let mut wm = w.clone();
            wp[i] += h;
            wm[i] -= h;
            assert_relative_eq!((half_sq(&wp) - half_sq(&wm)) / (2.0 * h), e.grad[i], epsilon = 1e-8);
            let gp = norm.eval(&wp).unwrap().grad;
            let gm = norm.eval(&wm).unwrap().grad;
            for j in 0..2 {
                assert_relative_eq!((gp[j] - gm[j]) / (2.0 * h), e.hess[(j, i)], epsilon = 1e-8);
            }
        }
    }
}
