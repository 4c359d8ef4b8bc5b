//! Number formatting shared by the CSV and text emitters.

/// `%g`-style rendering with `digits` significant digits: fixed notation for
/// decimal exponents in `[-5, digits)`, scientific otherwise, trailing zeros
/// trimmed.
pub fn sig(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let digits = digits.max(1);
    // Round first so that e.g. 9.9999996 reports exponent 1, not 0.
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -5 || exp >= digits as i32 {
        format!("{}e{}", trim_zeros(mantissa), exp)
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Six significant digits, the CSV precision.
pub fn csv_num(x: f64) -> String {
    sig(x, 6)
}

/// Four significant digits, the text-table precision.
pub fn text_num(x: f64) -> String {
    sig(x, 4)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_printf_g() {
        let cases = [
            (0.0, "0"),
            (1.0, "1"),
            (10.4, "10.4"),
            (-8.676449592, "-8.67645"),
            (335.860766, "335.861"),
            (0.000123456789, "0.000123457"),
            (1234567.0, "1.23457e6"),
            (9.9999996, "10"),
            (-0.5, "-0.5"),
            (1e-7, "1e-7"),
        ];
        for (x, want) in cases {
            assert_eq!(sig(x, 6), want, "{x}");
        }
        assert_eq!(text_num(32.4451255), "32.45");
    }

    #[test]
    fn parses_back_within_precision() {
        for x in [4.27182818, -1234.5678, 0.0012345678, 98765.4321] {
            let y: f64 = csv_num(x).parse().unwrap();
            assert!(((x - y) / x).abs() < 5e-6);
        }
    }
}
