//! Scalar abstraction shared by the arithmetic kernels, plus exact decimal
//! parsing for configuration values.

use std::fmt::Debug;

use num_traits::{FromPrimitive, Num, Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::Rational;

/// Numeric type the vote-power, tally and risk kernels can run over.
///
/// Implemented for every ordered field type from `num-traits`, so both
/// [`Rational`] and `f64` qualify.
pub trait Scalar: Num + Copy + PartialOrd + FromPrimitive + Debug {
    /// `numer / denom` in this scalar type.
    fn ratio(numer: i64, denom: i64) -> Self {
        Self::from_i64(numer).expect("numerator representable")
            / Self::from_i64(denom).expect("denominator representable")
    }

    fn from_count(n: u64) -> Self {
        Self::from_u64(n).expect("count representable")
    }

    fn min_of(a: Self, b: Self) -> Self {
        if b < a {
            b
        } else {
            a
        }
    }

    fn clamp_unit(self) -> Self {
        if self < Self::zero() {
            Self::zero()
        } else if self > Self::one() {
            Self::one()
        } else {
            self
        }
    }
}

impl<T: Num + Copy + PartialOrd + FromPrimitive + Debug> Scalar for T {}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("cannot parse {input:?} as an exact rational")]
pub struct ParseRationalError {
    pub input: String,
}

/// Parses `"3/2"`, `"0.25"`, `"-4"` into an exact rational.
pub fn parse_rational(input: &str) -> Result<Rational, ParseRationalError> {
    let err = || ParseRationalError {
        input: input.to_string(),
    };
    let s = input.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n: i128 = n.trim().parse().map_err(|_| err())?;
        let d: i128 = d.trim().parse().map_err(|_| err())?;
        if d == 0 {
            return Err(err());
        }
        return Ok(Rational::new(n, d));
    }
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(err());
    }
    if !int_part.chars().all(|c| c.is_ascii_digit()) || !frac_part.chars().all(|c| c.is_ascii_digit())
    {
        return Err(err());
    }
    if frac_part.len() > 30 {
        return Err(err());
    }
    let digits = format!("{int_part}{frac_part}");
    let numer: i128 = if digits.is_empty() {
        0
    } else {
        digits.parse().map_err(|_| err())?
    };
    let denom = 10i128.checked_pow(frac_part.len() as u32).ok_or_else(err)?;
    let r = Rational::new(numer, denom);
    Ok(if neg { -r } else { r })
}

/// Formats a rational as `"n"` or `"n/d"`.
pub fn format_rational(r: &Rational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn rational_to_f64(r: &Rational) -> f64 {
    r.numer().to_f64().unwrap_or(f64::NAN) / r.denom().to_f64().unwrap_or(f64::NAN)
}

/// Floor of a non-negative rational as `u64`.
pub fn floor_u64(r: &Rational) -> u64 {
    debug_assert!(!r.is_negative() || r.is_zero());
    r.floor().to_integer().max(0) as u64
}

/// Serde adapter: rationals as `"n/d"` strings; accepts strings or JSON numbers.
pub mod serde_rational {
    use serde::de::{self, Visitor};
    use serde::{Deserializer, Serializer};
    use std::fmt;

    use super::{format_rational, parse_rational};
    use crate::Rational;

    pub fn serialize<S: Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_rational(r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        if d.is_human_readable() {
            d.deserialize_any(RationalVisitor)
        } else {
            d.deserialize_str(RationalVisitor)
        }
    }

    pub(crate) struct RationalVisitor;

    impl<'de> Visitor<'de> for RationalVisitor {
        type Value = Rational;

        fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
            f.write_str("a rational as a number or \"n/d\" string")
        }

        fn visit_str<E: de::Error>(self, v: &str) -> Result<Rational, E> {
            parse_rational(v).map_err(E::custom)
        }

        fn visit_u64<E: de::Error>(self, v: u64) -> Result<Rational, E> {
            Ok(Rational::from_integer(v as i128))
        }

        fn visit_i64<E: de::Error>(self, v: i64) -> Result<Rational, E> {
            Ok(Rational::from_integer(v as i128))
        }

        fn visit_f64<E: de::Error>(self, v: f64) -> Result<Rational, E> {
            if !v.is_finite() {
                return Err(E::custom("non-finite rational"));
            }
            // Shortest round-trip decimal, which is what the author typed.
            parse_rational(&format!("{v}")).map_err(E::custom)
        }
    }
}

/// Serde adapter for maps whose values are rationals.
pub mod serde_rational_map {
    use serde::de::{MapAccess, Visitor};
    use serde::ser::SerializeMap;
    use serde::{Deserialize, Deserializer, Serializer};
    use std::collections::BTreeMap;
    use std::fmt;
    use std::marker::PhantomData;

    use super::format_rational;
    use crate::Rational;

    pub fn serialize<K, S>(m: &BTreeMap<K, Rational>, s: S) -> Result<S::Ok, S::Error>
    where
        K: serde::Serialize,
        S: Serializer,
    {
        let mut map = s.serialize_map(Some(m.len()))?;
        for (k, v) in m {
            map.serialize_entry(k, &format_rational(v))?;
        }
        map.end()
    }

    pub fn deserialize<'de, K, D>(d: D) -> Result<BTreeMap<K, Rational>, D::Error>
    where
        K: Deserialize<'de> + Ord,
        D: Deserializer<'de>,
    {
        struct Wrapped(Rational);
        impl<'de> Deserialize<'de> for Wrapped {
            fn deserialize<D2: Deserializer<'de>>(d: D2) -> Result<Self, D2::Error> {
                super::serde_rational::deserialize(d).map(Wrapped)
            }
        }
        struct MapVisitor<K>(PhantomData<K>);
        impl<'de, K: Deserialize<'de> + Ord> Visitor<'de> for MapVisitor<K> {
            type Value = BTreeMap<K, Rational>;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a map of rationals")
            }
            fn visit_map<A: MapAccess<'de>>(self, mut access: A) -> Result<Self::Value, A::Error> {
                let mut out = BTreeMap::new();
                while let Some((k, Wrapped(v))) = access.next_entry::<K, Wrapped>()? {
                    out.insert(k, v);
                }
                Ok(out)
            }
        }
        d.deserialize_map(MapVisitor(PhantomData))
    }
}
