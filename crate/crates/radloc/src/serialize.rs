//! Text formatting for output files.

/// Decimal form with 17 significant digits, enough to round-trip any f64
/// exactly. All numeric output files use this so reruns are byte-identical.
pub fn float17(x: f64) -> String {
    format!("{x:.16e}")
}
