use nalgebra::{DMatrix, DVector};

/// Singular values in decreasing order.
pub fn singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    if a.is_empty() {
        return Vec::new();
    }
    let mut s: Vec<f64> = a.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

/// Number of singular values above `rel_tol` times the largest one.
pub fn numerical_rank(a: &DMatrix<f64>, rel_tol: f64) -> usize {
    let s = singular_values(a);
    match s.first() {
        Some(&largest) if largest > 0.0 => s.iter().filter(|&&v| v > rel_tol * largest).count(),
        _ => 0,
    }
}

/// Minimum-norm solution `p = A (AᵀA)⁻¹ u` of `Aᵀp = u` for a full column rank `A`.
pub fn min_norm_lift(a: &DMatrix<f64>, u: &DVector<f64>) -> Option<DVector<f64>> {
    let gram = a.transpose() * a;
    let y = gram.cholesky()?.solve(u);
    Some(a * y)
}

pub fn to_dvector(x: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(x)
}
