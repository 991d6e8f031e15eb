//! Numeric formatting shared by the CSV writers.

/// Formats a double with 17 significant digits, enough to round-trip any
/// finite `f64` exactly.
pub fn fmt17(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}
