//! Comparison tolerances shared across the crate.

/// Equality tolerance for payments, welfare and other exact-arithmetic quantities.
pub const EXACT: f64 = 1e-12;

/// Regret at or below this counts as an exact equilibrium.
pub const EQUILIBRIUM: f64 = 1e-9;

/// Inequality margins above `-INEQUALITY` count as satisfied.
pub const INEQUALITY: f64 = 1e-9;

/// Residual target for the Lambert W iteration.
pub const LAMBERT_RESIDUAL: f64 = 1e-12;

/// `a <= b` up to [`EXACT`], scaled by magnitude.
pub(crate) fn le(a: f64, b: f64) -> bool {
    a <= b + EXACT * 1f64.max(a.abs()).max(b.abs())
}

pub(crate) fn approx_eq(a: f64, b: f64) -> bool {
    (a - b).abs() <= EXACT * 1f64.max(a.abs()).max(b.abs())
}
