//! Independent reference values. Nothing here calls into the integrator or
//! the shooting code; the Heisenberg formulas come from the explicit solution
//! of the geodesic equations, the norm oracles from brute-force sampling.

#![allow(dead_code)]

use std::f64::consts::PI;

/// Group product on the Heisenberg group with frames `∂x − (y/2)∂z`, `∂y + (x/2)∂z`.
pub fn heis_mul(g: [f64; 3], h: [f64; 3]) -> [f64; 3] {
    [g[0] + h[0], g[1] + h[1], g[2] + h[2] + 0.5 * (g[0] * h[1] - g[1] * h[0])]
}

pub fn heis_inv(g: [f64; 3]) -> [f64; 3] {
    [-g[0], -g[1], -g[2]]
}

/// Endpoint at time `t` of the sub-Riemannian geodesic from `x0` with
/// initial covector `p0`. In left-invariant coordinates the fiber momentum
/// `u = (u₁, u₂)` rotates with angular speed `c = p_z`.
pub fn heis_geodesic(x0: [f64; 3], p0: [f64; 3], t: f64) -> [f64; 3] {
    let u1 = p0[0] - 0.5 * x0[1] * p0[2];
    let u2 = p0[1] + 0.5 * x0[0] * p0[2];
    let c = p0[2];
    let local = if c.abs() < 1e-12 {
        [u1 * t, u2 * t, 0.0]
    } else {
        let (s, co) = (c * t).sin_cos();
        // (u₁ + i u₂)(e^{ict} − 1)/(ic)
        let x = (u1 * s + u2 * (co - 1.0)) / c;
        let y = (u2 * s - u1 * (co - 1.0)) / c;
        let z = (u1 * u1 + u2 * u2) * (c * t - s) / (2.0 * c * c);
        [x, y, z]
    };
    heis_mul(x0, local)
}

/// Sub-Riemannian Heisenberg distance. After left translation to the
/// origin, a minimizer to `(a, b, h)` projects to a circular arc with chord
/// `r = |(a, b)|` turning by `φ ∈ (−2π, 2π)` where
/// `h / r² = (φ − sin φ) / (8 sin²(φ/2))`; its length is `r (φ/2) / sin(φ/2)`.
pub fn heis_distance(from: [f64; 3], to: [f64; 3]) -> f64 {
    let [a, b, h] = heis_mul(heis_inv(from), to);
    let r = (a * a + b * b).sqrt();
    if r == 0.0 {
        return 2.0 * (PI * h.abs()).sqrt();
    }
    if h == 0.0 {
        return r;
    }
    let target = h.abs() / (r * r);
    let ratio = |phi: f64| (phi - phi.sin()) / (8.0 * (0.5 * phi).sin().powi(2));
    let (mut lo, mut hi) = (0.0f64, 2.0 * PI);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if mid > 0.0 && ratio(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let phi = 0.5 * (lo + hi);
    r * (0.5 * phi) / (0.5 * phi).sin()
}

/// `F(w) = √(wᵀGw) + b·w` for a 2×2 `G`.
pub fn randers_value(g: [[f64; 2]; 2], b: [f64; 2], w: [f64; 2]) -> f64 {
    let q = w[0] * (g[0][0] * w[0] + g[0][1] * w[1]) + w[1] * (g[1][0] * w[0] + g[1][1] * w[1]);
    q.sqrt() + b[0] * w[0] + b[1] * w[1]
}

/// Distance in a flat plane with a constant norm, by restriction to the
/// segment: straight lines minimize, so `d(x, y) = F(y − x)`.
pub fn line_distance(norm: impl Fn([f64; 2]) -> f64, x: [f64; 2], y: [f64; 2]) -> f64 {
    norm([y[0] - x[0], y[1] - x[1]])
}

/// `F*(u) = sup_{F(w)=1} u·w` by sampling `samples` directions of the plane.
pub fn brute_dual_norm(norm: impl Fn([f64; 2]) -> f64, u: [f64; 2], samples: usize) -> f64 {
    (0..samples)
        .map(|i| {
            let th = 2.0 * PI * i as f64 / samples as f64;
            let w = [th.cos(), th.sin()];
            (u[0] * w[0] + u[1] * w[1]) / norm(w)
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Closed-form Legendre map `w ↦ Gw` of a quadratic norm (diagonal `G`).
pub fn quadratic_legendre(diag: [f64; 2], w: [f64; 2]) -> [f64; 2] {
    [diag[0] * w[0], diag[1] * w[1]]
}

/// `H(u) = ½ uᵀG⁻¹u` for diagonal `G`.
pub fn quadratic_hamiltonian(diag: [f64; 2], u: [f64; 2]) -> f64 {
    0.5 * (u[0] * u[0] / diag[0] + u[1] * u[1] / diag[1])
}

pub fn spec_path(name: &str) -> String {
    format!("{}/specs/{name}", env!("CARGO_MANIFEST_DIR"))
}
