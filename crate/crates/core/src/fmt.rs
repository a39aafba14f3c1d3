//! Float formatting shared by the CSV writers.

/// Formats an `f64` with 17 significant digits, enough for an exact
/// round-trip through parsing.
pub(crate) fn g17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Formats an `f64` with 12 significant digits.
pub(crate) fn g12(x: f64) -> String {
    format!("{x:.11e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g17_round_trips() {
        for &x in &[
            0.0,
            -0.0,
            1.0,
            std::f64::consts::PI,
            1.0 / 3.0,
            -2.2250738585072014e-308,
            1.7976931348623157e308,
            0.1 + 0.2,
        ] {
            let s = g17(x);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back.to_bits(), x.to_bits(), "{s} did not round-trip");
        }
    }
}
