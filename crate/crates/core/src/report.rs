//! Number formatting shared by CSV and JSON reports.

/// Formats a value with six significant digits in plain decimal notation,
/// switching to scientific notation outside `[1e-4, 1e6)`. Non-finite values
/// print as `inf`, `-inf` or `nan`.
pub fn format_sig(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let mag = v.abs();
    if !(1e-4..1e6).contains(&mag) {
        return format!("{v:.5e}");
    }
    let exponent = mag.log10().floor() as i32;
    let decimals = (5 - exponent).max(0) as usize;
    let s = format!("{v:.decimals$}");
    if s.contains('.') {
        let trimmed = s.trim_end_matches('0').trim_end_matches('.');
        if trimmed == "-0" {
            "0".into()
        } else {
            trimmed.into()
        }
    } else {
        s
    }
}
