//! Exact rational numbers and their text forms.
//!
//! Values are read from either `"num/den"` or plain decimal strings
//! (`"1.25"`, `"-3"`) and written back as `"num/den"` (or a bare integer).

use num::bigint::BigInt;
use num::rational::BigRational;
use num::traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type Rational = BigRational;

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn ratio(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

pub fn zero() -> Rational {
    Rational::zero()
}

pub fn one() -> Rational {
    Rational::one()
}

/// Parses `"a/b"`, `"a"` or a decimal such as `"0.125"` exactly.
pub fn parse(text: &str) -> Result<Rational> {
    let s = text.trim();
    let bad = || Error::Parse(text.to_string());
    if s.is_empty() {
        return Err(bad());
    }
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| bad())?;
        let d: BigInt = d.trim().parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        return Ok(Rational::new(n, d));
    }
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (whole, frac) = body.split_once('.').unwrap_or((body, ""));
    if whole.is_empty() && frac.is_empty() {
        return Err(bad());
    }
    if !whole
        .chars()
        .chain(frac.chars())
        .all(|c| c.is_ascii_digit())
    {
        return Err(bad());
    }
    let digits = format!("{whole}{frac}");
    let numer: BigInt = if digits.is_empty() {
        BigInt::zero()
    } else {
        digits.parse().map_err(|_| bad())?
    };
    let denom = num::pow(BigInt::from(10u32), frac.len());
    let value = Rational::new(numer, denom);
    Ok(if neg { -value } else { value })
}

/// `"num/den"`, or just `"num"` for integers.
pub fn to_exact_string(x: &Rational) -> String {
    if x.is_integer() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

/// Decimal rendering rounded half away from zero to `digits` places.
pub fn to_decimal_string(x: &Rational, digits: usize) -> String {
    let scale = num::pow(BigInt::from(10u32), digits);
    let scaled = x.abs() * Rational::from_integer(scale.clone());
    let rounded = (scaled + ratio(1, 2)).floor().to_integer();
    let int_part = &rounded / &scale;
    let frac_part = &rounded % &scale;
    let sign = if x.is_negative() && !rounded.is_zero() {
        "-"
    } else {
        ""
    };
    if digits == 0 {
        format!("{sign}{int_part}")
    } else {
        format!(
            "{sign}{int_part}.{:0>width$}",
            frac_part.to_string(),
            width = digits
        )
    }
}

pub fn to_f64(x: &Rational) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Exact rational value of a finite `f64`.
pub fn from_f64(x: f64) -> Result<Rational> {
    Rational::from_float(x).ok_or_else(|| Error::Parse(x.to_string()))
}

/// Largest rational `k / 10^6` whose square does not exceed `alpha`.
pub fn sqrt_floor(alpha: &Rational) -> Rational {
    const SCALE: i64 = 1_000_000;
    let guess = (to_f64(alpha).sqrt() * SCALE as f64).floor() as i64;
    let mut k = guess.max(0);
    while ratio(k + 1, SCALE) * ratio(k + 1, SCALE) <= *alpha {
        k += 1;
    }
    while k > 0 && ratio(k, SCALE) * ratio(k, SCALE) > *alpha {
        k -= 1;
    }
    ratio(k, SCALE)
}

pub(crate) mod serde_rational {
    use super::*;
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &Rational, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&to_exact_string(x))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Rational, D::Error> {
        let v = serde_json::Value::deserialize(d)?;
        value_to_rational(&v).map_err(de::Error::custom)
    }

    pub fn value_to_rational(v: &serde_json::Value) -> Result<Rational> {
        match v {
            serde_json::Value::String(s) => parse(s),
            serde_json::Value::Number(n) => parse(&n.to_string()),
            other => Err(Error::Parse(other.to_string())),
        }
    }
}

pub(crate) mod serde_rational_vec {
    use super::*;
    use serde::{de, ser::SerializeSeq, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(xs: &[Rational], s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(xs.len()))?;
        for x in xs {
            seq.serialize_element(&to_exact_string(x))?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> std::result::Result<Vec<Rational>, D::Error> {
        let vs = Vec::<serde_json::Value>::deserialize(d)?;
        vs.iter()
            .map(|v| serde_rational::value_to_rational(v).map_err(de::Error::custom))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_fractions_and_decimals() {
        assert_eq!(parse("3/2").unwrap(), ratio(3, 2));
        assert_eq!(parse("1.5").unwrap(), ratio(3, 2));
        assert_eq!(parse("-0.25").unwrap(), ratio(-1, 4));
        assert_eq!(parse("4").unwrap(), int(4));
        assert_eq!(parse(".5").unwrap(), ratio(1, 2));
        assert_eq!(parse("0.1").unwrap(), ratio(1, 10));
        assert!(parse("1/0").is_err());
        assert!(parse("abc").is_err());
        assert!(parse("").is_err());
        assert!(parse("1e3").is_err());
    }

    #[test]
    fn renders() {
        assert_eq!(to_exact_string(&ratio(6, 4)), "3/2");
        assert_eq!(to_exact_string(&int(7)), "7");
        assert_eq!(to_decimal_string(&ratio(2, 3), 4), "0.6667");
        assert_eq!(to_decimal_string(&ratio(-1, 8), 2), "-0.13");
        assert_eq!(to_decimal_string(&int(12), 0), "12");
        assert_eq!(to_decimal_string(&ratio(-1, 1000), 2), "0.00");
    }

    #[test]
    fn sqrt_floor_is_below_root() {
        for a in [ratio(101, 100), ratio(11, 10), ratio(3, 2), int(2), int(4)] {
            let r = sqrt_floor(&a);
            assert!(&r * &r <= a);
            let up = &r + ratio(1, 1_000_000);
            assert!(&up * &up > a);
        }
    }
}
