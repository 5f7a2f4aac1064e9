//! Multivariate polynomials with matrix coefficients viewed entrywise:
//! scalar polynomials, symmetric/general t×t matrix polynomials, and the
//! coefficient abstraction that lets the same code run exactly over
//! arbitrary-precision rationals or approximately over f64.
//!
//! Monomials are ordered graded-lexicographically and every polynomial is
//! kept in canonical form (no explicit zero coefficients), so equality is
//! structural and serialization is deterministic.

mod coeff;
mod json;
mod matrix;
mod monomial;
mod scalar;

pub use coeff::{Coeff, Rat};
pub(crate) use coeff::{f64_to_rat_exact, rat, rat_int, rat_to_f64, round_f64_to_rat};
pub(crate) use json::get_usize;
pub use json::{scalar_from_json, scalar_to_json};
pub use matrix::MatrixPoly;
pub use monomial::{monomials_up_to, Monomial};
pub use scalar::ScalarPoly;

/// Errors from parsing or validating polynomial data.
#[derive(Debug, thiserror::Error)]
pub enum PolyError {
    #[error("variable count mismatch: {0} vs {1}")]
    VarMismatch(usize, usize),
    #[error("matrix dimension mismatch: {0}x{0} vs {1}x{1}")]
    DimMismatch(usize, usize),
    #[error("malformed polynomial data: {0}")]
    Malformed(String),
}

/// Exact rational matrix polynomial.
pub type QMatPoly = MatrixPoly<Rat>;
/// Floating-point matrix polynomial.
pub type FMatPoly = MatrixPoly<f64>;
/// Exact rational scalar polynomial.
pub type QPoly = ScalarPoly<Rat>;
/// Floating-point scalar polynomial.
pub type FPoly = ScalarPoly<f64>;
