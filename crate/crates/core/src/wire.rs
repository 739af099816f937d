//! Serde adapters: big integers as decimal strings, rationals as
//! `{num, den}` decimal strings. No value is ever routed through a float.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::Zero;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// `{num, den}` with both parts as decimal strings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RationalWire {
    pub num: String,
    pub den: String,
}

impl From<&BigRational> for RationalWire {
    fn from(r: &BigRational) -> Self {
        RationalWire {
            num: r.numer().to_string(),
            den: r.denom().to_string(),
        }
    }
}

impl TryFrom<RationalWire> for BigRational {
    type Error = String;

    fn try_from(w: RationalWire) -> Result<Self, String> {
        let num: BigInt = w.num.parse().map_err(|_| format!("bad numerator {:?}", w.num))?;
        let den: BigInt = w.den.parse().map_err(|_| format!("bad denominator {:?}", w.den))?;
        if den.is_zero() {
            return Err("zero denominator".into());
        }
        Ok(BigRational::new(num, den))
    }
}

pub mod rational {
    use super::*;

    pub fn serialize<S: Serializer>(r: &BigRational, s: S) -> Result<S::Ok, S::Error> {
        RationalWire::from(r).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigRational, D::Error> {
        let w = RationalWire::deserialize(d)?;
        BigRational::try_from(w).map_err(serde::de::Error::custom)
    }
}

pub mod natural {
    use super::*;

    pub fn serialize<S: Serializer>(v: &BigUint, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(v)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigUint, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Parses a count given either in decimal or as a power of two (`2^43`).
pub fn parse_natural(s: &str) -> Result<BigUint, String> {
    let s = s.trim();
    if let Some(e) = s.strip_prefix("2^") {
        let e: u64 = e.parse().map_err(|_| format!("bad exponent in {s:?}"))?;
        return Ok(BigUint::from(1u32) << e);
    }
    s.parse().map_err(|_| format!("expected a decimal count or 2^k, got {s:?}"))
}

/// Exponent `k` when `v = 2^k`.
pub fn exact_log2(v: &BigUint) -> Option<u64> {
    let t = v.trailing_zeros()?;
    (v.bits() == t + 1).then_some(t)
}
