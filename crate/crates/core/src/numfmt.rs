//! Decimal rendering shared by every text format this crate emits.
//!
//! All on-disk floats are written with 17 significant digits, which is
//! enough to reproduce any f64 bit-exactly on reparse. Missing values are
//! the lowercase literal `nan`.

/// Renders a float with 17 significant digits (`nan` for non-values).
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else {
        format!("{v:.16e}")
    }
}

/// Parses a decimal literal or the literal `nan`.
///
/// Non-finite spellings other than `nan` (`inf`, `NaN`, ...) are rejected:
/// the formats only ever contain finite numbers and lowercase `nan`.
pub fn parse_f64(token: &str) -> Option<f64> {
    if token == "nan" {
        return Some(f64::NAN);
    }
    match token.parse::<f64>() {
        Ok(v) if v.is_finite() => Some(v),
        _ => None,
    }
}
