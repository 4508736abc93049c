//! Formatting helpers for the data-file interfaces.

/// Formats a float with 17 significant digits, round-trip safe for `f64`.
pub fn fmt_g17(v: f64) -> String {
    format!("{v:.16e}")
}

#[cfg(test)]
mod tests {
    use super::fmt_g17;

    #[test]
    fn seventeen_digits_roundtrip() {
        for &v in &[0.1, -3.947841760435743e1, 1.0 / 3.0, 0.0, 1e-300] {
            let s = fmt_g17(v);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back, v, "{s}");
        }
    }
}
