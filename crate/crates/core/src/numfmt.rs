//! Fixed-notation number formatting for CSV output.

/// Formats `x` rounded to `digits` significant digits, in positional
/// notation with trailing zeros after the decimal point trimmed.
///
/// ```
/// use railplan::numfmt::fixed_sig;
/// assert_eq!(fixed_sig(1.25, 6), "1.25");
/// assert_eq!(fixed_sig(6_710_886_400.0, 6), "6710890000");
/// assert_eq!(fixed_sig(0.000123456789, 6), "0.000123457");
/// ```
pub fn fixed_sig(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific notation");
    let exp: i64 = exp.parse().expect("integer exponent");
    let (sign, mantissa) = match mantissa.strip_prefix('-') {
        Some(m) => ("-", m),
        None => ("", mantissa),
    };
    let sig: String = mantissa.chars().filter(|c| *c != '.').collect();
    let n = sig.len() as i64;

    let mut out = String::from(sign);
    if exp >= n - 1 {
        out.push_str(&sig);
        out.extend(std::iter::repeat_n('0', (exp - (n - 1)) as usize));
        return out;
    }
    if exp >= 0 {
        let (int, frac) = sig.split_at(exp as usize + 1);
        out.push_str(int);
        out.push('.');
        out.push_str(frac);
    } else {
        out.push_str("0.");
        out.extend(std::iter::repeat_n('0', (-exp - 1) as usize));
        out.push_str(&sig);
    }
    let trimmed = out.trim_end_matches('0').trim_end_matches('.');
    trimmed.to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cases() {
        assert_eq!(fixed_sig(0.0, 6), "0");
        assert_eq!(fixed_sig(-0.0, 6), "0");
        assert_eq!(fixed_sig(1.0, 6), "1");
        assert_eq!(fixed_sig(70.6912345, 6), "70.6912");
        assert_eq!(fixed_sig(-70.6912345, 6), "-70.6912");
        assert_eq!(fixed_sig(999999.7, 6), "1000000");
        assert_eq!(fixed_sig(0.1, 6), "0.1");
        assert_eq!(fixed_sig(123456.0, 6), "123456");
        assert_eq!(fixed_sig(1.0e-7, 6), "0.0000001");
        assert_eq!(fixed_sig(196_083_712.0, 6), "196084000");
        assert_eq!(fixed_sig(f64::NAN, 6), "NaN");
    }

    proptest::proptest! {
        #[test]
        fn round_trips_to_six_digits(x in -1e15f64..1e15) {
            let s = fixed_sig(x, 6);
            proptest::prop_assert!(!s.contains('e'));
            let back: f64 = s.parse().unwrap();
            if x != 0.0 {
                proptest::prop_assert!(((back - x) / x).abs() <= 5.0001e-6);
            }
        }
    }
}
