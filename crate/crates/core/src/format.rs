//! Round-trip float formatting for the CSV and NDJSON writers.

/// Formats `v` with 17 significant digits, which is enough for any `f64` to
/// parse back to the same bits. Plain notation is used for decimal exponents
/// in `[-4, 16]`, scientific notation otherwise.
pub fn sig17(v: f64) -> String {
    if !v.is_finite() {
        return format!("{v}");
    }
    if v == 0.0 {
        return if v.is_sign_negative() { "-0.0" } else { "0.0" }.to_string();
    }
    let sci = format!("{v:.16e}");
    let exp: i32 = sci
        .rsplit_once('e')
        .and_then(|(_, e)| e.parse().ok())
        .unwrap_or(0);
    if (-4..=16).contains(&exp) {
        format!("{:.*}", (16 - exp) as usize, v)
    } else {
        sci
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert_eq!(sig17(18.0), "18.000000000000000");
        assert_eq!(sig17(0.0), "0.0");
        assert_eq!(sig17(1.0), "1.0000000000000000");
        assert_eq!(sig17(1e-7), "9.9999999999999995e-8");
        assert_eq!(sig17(2.5e-3), "0.0025000000000000001");
        assert_eq!(sig17(1.5e20), "1.5000000000000000e20");
    }

    #[test]
    fn round_trips() {
        let mut x = 0.123456789f64;
        for _ in 0..200 {
            for v in [x, -x, 1.0 / x, x * 1e-12, x * 1e15] {
                let s = sig17(v);
                assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits(), "{s}");
            }
            x = (x * 7.31 + 0.377).fract() + 1e-3;
        }
        assert_eq!(sig17(0.1 + 0.2).parse::<f64>().unwrap(), 0.1 + 0.2);
    }
}
