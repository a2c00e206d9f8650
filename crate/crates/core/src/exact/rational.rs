use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

/// Exact rational scalar. `BigRational` keeps numerator and denominator
/// reduced with a positive denominator after every operation.
pub type Rational = BigRational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid rational literal `{0}`")]
pub struct ParseRationalError(pub String);

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn ratio(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

/// Parses `p/q`, integers and decimal literals (`1.25` is exactly 5/4),
/// each with an optional sign.
pub fn parse_rational(text: &str) -> Result<Rational, ParseRationalError> {
    let err = || ParseRationalError(text.to_string());
    let (negative, body) = match text.as_bytes().first() {
        Some(b'-') => (true, &text[1..]),
        Some(b'+') => (false, &text[1..]),
        _ => (false, text),
    };
    if body.is_empty() {
        return Err(err());
    }
    let digits = |s: &str| !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit());
    let value = if let Some((num, den)) = body.split_once('/') {
        if !digits(num) || !digits(den) {
            return Err(err());
        }
        let den = BigInt::from_str(den).map_err(|_| err())?;
        if den.is_zero() {
            return Err(err());
        }
        Rational::new(BigInt::from_str(num).map_err(|_| err())?, den)
    } else if let Some((whole, frac)) = body.split_once('.') {
        if !(digits(whole) || whole.is_empty()) || !digits(frac) {
            return Err(err());
        }
        let whole = if whole.is_empty() { "0" } else { whole };
        let scale = BigInt::from(10u32).pow(frac.len() as u32);
        let num = BigInt::from_str(whole).map_err(|_| err())? * &scale
            + BigInt::from_str(frac).map_err(|_| err())?;
        Rational::new(num, scale)
    } else {
        if !digits(body) {
            return Err(err());
        }
        Rational::from_integer(BigInt::from_str(body).map_err(|_| err())?)
    };
    Ok(if negative { -value } else { value })
}

/// Always `p/q`, including `/1` for integers.
pub fn format_exact(value: &Rational) -> String {
    format!("{}/{}", value.numer(), value.denom())
}

/// `p/q`, or just `p` for integers. Used by the problem writer.
pub fn format_compact(value: &Rational) -> String {
    if value.is_integer() {
        value.numer().to_string()
    } else {
        format_exact(value)
    }
}

pub fn to_f64(value: &Rational) -> f64 {
    value.to_f64().unwrap_or_else(|| {
        if value.is_negative() {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        }
    })
}

/// `%.{digits}g`-style decimal rendering.
pub fn format_significant(value: f64, digits: usize) -> String {
    if value == 0.0 || !value.is_finite() {
        return format!("{value}");
    }
    let exponent = value.abs().log10().floor() as i32;
    let precision = digits.max(1) - 1;
    if exponent < -5 || exponent >= digits as i32 {
        let s = format!("{:.*e}", precision, value);
        let (mantissa, exp) = s.split_once('e').expect("exponent form");
        format!("{}e{}", trim_fraction(mantissa), exp)
    } else {
        let decimals = (precision as i32 - exponent).max(0) as usize;
        trim_fraction(&format!("{:.*}", decimals, value)).to_string()
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn midpoint(a: &Rational, b: &Rational) -> Rational {
    (a + b) / int(2)
}

pub fn is_one(value: &Rational) -> bool {
    value.is_one()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_all_literal_forms() {
        assert_eq!(parse_rational("1.25").unwrap(), ratio(5, 4));
        assert_eq!(parse_rational("-3/6").unwrap(), ratio(-1, 2));
        assert_eq!(parse_rational("+7").unwrap(), int(7));
        assert_eq!(parse_rational(".5").unwrap(), ratio(1, 2));
        assert_eq!(parse_rational("3000").unwrap(), int(3000));
        for bad in ["", "-", "1/0", "a", "1.2.3", "1/-2", "1e5"] {
            assert!(parse_rational(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn canonical_form_after_arithmetic() {
        let x = ratio(6, -4) + ratio(1, 2);
        assert_eq!(x.numer(), &BigInt::from(-1));
        assert_eq!(x.denom(), &BigInt::from(1));
        assert_eq!(format_exact(&x), "-1/1");
        assert_eq!(format_exact(&Rational::zero()), "0/1");
    }

    #[test]
    fn significant_digit_rendering() {
        assert_eq!(format_significant(350250.0 / 430250.0, 12), "0.814061592098");
        assert_eq!(format_significant(430250.0, 12), "430250");
        assert_eq!(format_significant(1.0 / 12.0, 12), "0.0833333333333");
        assert_eq!(format_significant(2.5e-9, 12), "2.5e-9");
    }
}
