//! Deterministic number formatting for all emitted text: 17 significant
//! digits in scientific notation, `.` as decimal separator, no locale
//! dependence. 17 digits round-trip any f64 exactly.

/// Format a float with 17 significant digits. Negative zero is normalized so
/// equal values always render identically.
pub fn format_f64(x: f64) -> String {
    let x = if x == 0.0 { 0.0 } else { x };
    format!("{x:.16e}")
}
