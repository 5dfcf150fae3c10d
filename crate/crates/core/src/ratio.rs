use std::fmt;
use std::str::FromStr;

use serde::de::{self, Deserializer, MapAccess, Visitor};
use serde::ser::{SerializeStruct, Serializer};
use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Non-negative exact rational used for dependency errors and thresholds.
///
/// Serialized as `{"numerator", "denominator", "decimal"}`; the decimal is for
/// display only. Deserialization additionally accepts a bare JSON number or a
/// string such as `"0.05"` or `"1/3"`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Ratio(num_rational::Ratio<u64>);

impl Ratio {
    pub const ZERO: Ratio = Ratio(num_rational::Ratio::new_raw(0, 1));
    pub const ONE: Ratio = Ratio(num_rational::Ratio::new_raw(1, 1));

    /// Panics when `denominator` is zero.
    pub fn new(numerator: u64, denominator: u64) -> Self {
        Ratio(num_rational::Ratio::new(numerator, denominator))
    }

    pub fn numerator(&self) -> u64 {
        *self.0.numer()
    }

    pub fn denominator(&self) -> u64 {
        *self.0.denom()
    }

    pub fn is_zero(&self) -> bool {
        self.numerator() == 0
    }

    pub fn to_f64(&self) -> f64 {
        self.numerator() as f64 / self.denominator() as f64
    }
}

impl Default for Ratio {
    fn default() -> Self {
        Ratio::ZERO
    }
}

impl fmt::Debug for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.numerator(), self.denominator())
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.denominator() == 1 {
            write!(f, "{}", self.numerator())
        } else {
            write!(f, "{}/{}", self.numerator(), self.denominator())
        }
    }
}

fn pow10(exp: u32) -> Option<u128> {
    10u128.checked_pow(exp)
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl FromStr for Ratio {
    type Err = Error;

    /// Parses `p/q`, plain decimals and decimals with an exponent, exactly.
    fn from_str(raw: &str) -> Result<Self, Error> {
        let s = raw.trim();
        let bad = |reason: &str| Error::invalid("threshold", format!("`{raw}`: {reason}"));
        if s.starts_with('-') {
            return Err(bad("must not be negative"));
        }
        if let Some((p, q)) = s.split_once('/') {
            let p: u64 = p.trim().parse().map_err(|_| bad("bad numerator"))?;
            let q: u64 = q.trim().parse().map_err(|_| bad("bad denominator"))?;
            if q == 0 {
                return Err(bad("zero denominator"));
            }
            return Ok(Ratio::new(p, q));
        }
        let s = s.strip_prefix('+').unwrap_or(s);
        let (mantissa, exp) = match s.find(['e', 'E']) {
            Some(pos) => {
                let e: i32 = s[pos + 1..].parse().map_err(|_| bad("bad exponent"))?;
                (&s[..pos], e)
            }
            None => (s, 0),
        };
        let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(bad("not a number"));
        }
        if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
            return Err(bad("not a number"));
        }
        let digits = format!("{int_part}{frac_part}");
        let digits = digits.trim_start_matches('0');
        let mut num: u128 = if digits.is_empty() {
            0
        } else {
            digits.parse().map_err(|_| bad("too many digits"))?
        };
        let scale = exp - frac_part.len() as i32;
        let mut den: u128 = 1;
        if scale >= 0 {
            num = num
                .checked_mul(pow10(scale as u32).ok_or_else(|| bad("out of range"))?)
                .ok_or_else(|| bad("out of range"))?;
        } else {
            den = pow10((-scale) as u32).ok_or_else(|| bad("too many digits"))?;
        }
        let g = gcd(num, den).max(1);
        let (num, den) = (num / g, den / g);
        match (u64::try_from(num), u64::try_from(den)) {
            (Ok(n), Ok(d)) => Ok(Ratio::new(n, d)),
            _ => Err(bad("precision exceeds 64-bit rationals")),
        }
    }
}

impl Serialize for Ratio {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("Ratio", 3)?;
        st.serialize_field("numerator", &self.numerator())?;
        st.serialize_field("denominator", &self.denominator())?;
        st.serialize_field("decimal", &self.to_f64())?;
        st.end()
    }
}

impl<'de> Deserialize<'de> for Ratio {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct RatioVisitor;

        impl<'de> Visitor<'de> for RatioVisitor {
            type Value = Ratio;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a non-negative number, a \"p/q\" string or a ratio object")
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Ratio, E> {
                Ok(Ratio::new(v, 1))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Ratio, E> {
                u64::try_from(v)
                    .map(|v| Ratio::new(v, 1))
                    .map_err(|_| E::custom("must not be negative"))
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Ratio, E> {
                if !v.is_finite() {
                    return Err(E::custom("must be finite"));
                }
                // Shortest round-trip formatting keeps "0.1" exact.
                self.visit_str(&format!("{v}"))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<Ratio, E> {
                v.parse().map_err(E::custom)
            }

            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<Ratio, A::Error> {
                let mut num = None;
                let mut den = None;
                while let Some(key) = map.next_key::<String>()? {
                    match key.as_str() {
                        "numerator" => num = Some(map.next_value::<u64>()?),
                        "denominator" => den = Some(map.next_value::<u64>()?),
                        _ => {
                            map.next_value::<de::IgnoredAny>()?;
                        }
                    }
                }
                let num = num.ok_or_else(|| de::Error::missing_field("numerator"))?;
                let den = den.ok_or_else(|| de::Error::missing_field("denominator"))?;
                if den == 0 {
                    return Err(de::Error::custom("zero denominator"));
                }
                Ok(Ratio::new(num, den))
            }
        }

        d.deserialize_any(RatioVisitor)
    }
}
