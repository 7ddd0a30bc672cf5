//! Fixed numeric formatting for exported files.

/// Format `x` with `digits` significant digits, `%g` style: plain decimal for
/// moderate exponents, scientific otherwise, trailing zeros trimmed.
pub fn sig(x: f64, digits: usize) -> String {
    assert!(digits >= 1);
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return "0".to_string();
    }
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if exp < -4 || exp >= digits as i32 {
        let mantissa = trim_zeros(mantissa);
        return format!("{mantissa}e{exp}");
    }
    let decimals = (digits as i32 - 1 - exp).max(0) as usize;
    trim_zeros(&format!("{:.*}", decimals, x)).to_string()
}

/// Nine significant digits, the precision of every numeric CSV column.
pub fn sig9(x: f64) -> String {
    sig(x, 9)
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn formats_like_percent_g() {
        assert_eq!(sig9(1.0), "1");
        assert_eq!(sig9(0.5), "0.5");
        assert_eq!(sig9(1.0 / 3.0), "0.333333333");
        assert_eq!(sig9(123456789.4), "123456789");
        assert_eq!(sig9(1234567890.0), "1.23456789e9");
        assert_eq!(sig9(0.000012345), "1.2345e-5");
        assert_eq!(sig9(-2.5), "-2.5");
        assert_eq!(sig9(9.9999999999), "10");
        assert_eq!(sig9(0.0), "0");
    }

    proptest! {
        #[test]
        fn keeps_nine_significant_digits(x in -1e12f64..1e12) {
            let back: f64 = sig9(x).parse().unwrap();
            let tol = x.abs() * 1e-8 + f64::MIN_POSITIVE;
            prop_assert!((back - x).abs() <= tol, "{} -> {}", x, sig9(x));
        }
    }
}
