//! Numeric conventions for identity checks.
//!
//! All monetary arithmetic is plain binary floating point; determinism comes
//! from summing in ascending account-id order. Identity checks compare two
//! algebraically equal routes, so the tolerance is applied relative to the
//! gross magnitude of the quantities entering the identity, not to the
//! (possibly cancelling) result.

/// Default relative tolerance for identity checks.
pub const DEFAULT_TOLERANCE: f64 = 1e-9;

/// True when `lhs` and `rhs` agree within `tol` relative to `gross`,
/// with an absolute floor of `tol` for degenerate scales.
pub fn identity_holds(lhs: f64, rhs: f64, gross: f64, tol: f64) -> bool {
    (lhs - rhs).abs() <= tol * gross.abs().max(1.0)
}

/// Plain relative comparison used where both sides share the same scale.
pub fn approx_eq(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}
