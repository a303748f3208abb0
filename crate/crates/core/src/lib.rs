//! Exact-arithmetic verification of the piecewise-linear minor-arc exponent
//! bounds for a pair of cubic forms, together with a desk-scale laboratory
//! for the underlying exponential-sum and singular-series machinery.
//!
//! The crate is organized around six concerns:
//!
//! * [`pwl`] — piecewise-linear expression trees over exact rationals;
//! * [`polytope`] — H-representation polytopes with an exact simplex and
//!   vertex enumeration;
//! * [`minmax`] — exact max-min optimization of expression families over
//!   polytopes, with verifiable certificates;
//! * [`bounds`] — construction of the five minor-arc exponent bounds and
//!   the verification driver;
//! * [`numlab`] — Smith normal forms, null counts, complete quadratic
//!   exponential sums, singular loci, Poisson-summation checks and
//!   truncated singular series.
//!
//! No floating point enters the optimizer; every bound, margin and vertex
//! is an exact rational. Floating point appears only in the exponential-sum
//! laboratory, where sums carry explicit error budgets.

// Index-style loops mirror the matrix algebra; negated comparisons guard
// against NaN parameters.
#![allow(clippy::needless_range_loop)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod error;
pub mod minmax;
pub mod numlab;
pub mod polytope;
pub mod pwl;
pub mod rat;

pub use error::Error;
pub use rat::Rat;
