//! Computational sub-Finsler geometry.
//!
//! A structure is declared by a frame `X₁..X_k` of a distribution on a chart
//! of `ℝⁿ` and a Minkowski norm on the frame coordinates ([`ManifoldSpec`]).
//! From it the crate computes Legendre duals and the sub-Hamiltonian
//! ([`duality`]), integrates normal extremals and exponential maps ([`flow`]),
//! estimates distances by multi-start shooting and probes completeness
//! ([`distance`]).

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod distance;
pub mod duality;
pub mod error;
pub mod expr;
pub mod flow;
pub mod geometry;
pub mod integrator;
pub mod linalg;
pub mod norm;
pub mod spec;

pub use error::{Error, Result};
pub use expr::{diff_expr, eval_expr, parse_expr, Expr};
pub use norm::{MinkowskiNorm, NormEval, NormKind};
pub use spec::{parse_manifold_spec, Domain, ManifoldSpec};
