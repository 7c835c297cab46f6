//! Rounding shared by demand conversion, multiplier scaling and restoration.

/// Tolerance used when comparing weights and rounding products.
pub const EPS: f64 = 1e-9;

/// Round to the nearest integer with ties going up, clamped at zero.
///
/// The small slack absorbs products like `0.3 * 5.0 = 1.5000000000000002`
/// and `1.4999999999999998` landing on the wrong side of a tie.
pub fn round_half_up(x: f64) -> u64 {
    if !x.is_finite() || x <= 0.0 {
        return 0;
    }
    (x + 0.5 + EPS).floor() as u64
}
