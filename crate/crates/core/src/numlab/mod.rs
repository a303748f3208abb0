//! Desk-scale exact and numerical laboratory for the exponential-sum and
//! singular-series machinery: Smith normal forms, null counts modulo q,
//! complete quadratic exponential sums with the divisibility criterion,
//! singular-locus dimensions over prime fields, Poisson-summation checks
//! and truncated singular series.

pub mod expsum;
pub mod locus;
pub mod matrix;
pub mod poisson;
pub mod poly;
pub mod series;

pub use expsum::{check_prop_t600, exp_sum_averaged, exp_sum_pointwise, ComplexVal, T600Report};
pub use locus::{d_of_q, is_prime, singular_locus_dim};
pub use matrix::{
    count_solutions_mod, delta_q, invariant_factors, null_count, rank_mod_p, smith_normal_form,
    IntMatrix, NullMethod,
};
pub use poisson::{gamma_bump, omega_weight, poisson_check, PoissonConfig, PoissonReport};
pub use poly::{difference_cubic, CubicPoly, DifferencedQuad, QuadPoly};
pub use series::{
    local_density, singular_integral, singular_series_partial, SeriesReport, SeriesTerm,
};
