//! Positivity certificates for symmetric matrix polynomials.
//!
//! Given a symmetric t×t matrix polynomial `f` in variables X1..Xn and a
//! finite set `G` of symmetric matrix polynomial constraints, this crate
//! searches for algebraic certificates of positivity properties of `f` on
//! the region where every member of `G` is positive semidefinite:
//!
//! * membership of `f` in the quadratic module generated by `G`
//!   (sums of terms `p* g p` with matrix polynomial transformers `p`),
//! * certificates that `f` is nowhere negative semidefinite on the region,
//! * sum-of-hermitian-squares factorizations `f = g* g` for univariate `f`
//!   that are positive semidefinite on the whole real line,
//! * boundedness witnesses `N - (X1^2 + .. + Xn^2)` for the module,
//! * certificates built from the characteristic polynomial when all
//!   eigenvalues of `f` are real and positive on the region.
//!
//! Failed searches are not silent: an infeasible relaxation produces a dual
//! ray which is re-interpreted as a separating linear functional, and where
//! possible that functional is collapsed to a concrete point/vector pair
//! `(x, v)` at which `<f(x)v, v> <= 0`.
//!
//! Numeric search runs on a self-contained semidefinite feasibility solver;
//! every certificate can be re-verified independently, either in floating
//! point or, after rounding to rational coefficients, by exact arithmetic.

pub mod certify;
pub mod diag;
pub mod gram;
pub mod json;
pub mod linalg;
pub mod poly;
pub mod sdp;
pub mod setops;
pub mod states;
pub mod univar;
