//! Numerical tolerances shared across modules.

/// Relative tolerance on quadrature sanity checks.
pub const RTOL_QUAD: f64 = 1e-6;
/// Relative tolerance for analytic derivatives against central differences.
pub const RTOL_FD: f64 = 1e-4;
/// Absolute slack on simplex constraints.
pub const ATOL_SIMPLEX: f64 = 1e-12;
/// Absolute slack on envelope domination.
pub const ATOL_ENV: f64 = 1e-10;
/// Relative slack on envelope domination; envelopes reach `e^40` in the tails.
pub const RTOL_ENV: f64 = 1e-9;
/// Hellinger distance below which `f` is treated as the reference itself.
pub const ATOL_H: f64 = 1e-9;
/// Slack on positive semidefiniteness.
pub const PSD_TOL: f64 = 1e-10;
/// Slack on parameter-domain membership.
pub const ATOL_DOMAIN: f64 = 1e-12;
/// Hard cap on materialized bracket counts.
pub const BRACKET_CAP: usize = 10_000_000;
