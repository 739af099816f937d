//! Dyadic rationals and certified enclosures.
//!
//! Irrational quantities (logarithms, fractional powers) never leave this
//! module as floating-point numbers. They are returned as a [`FloatInterval`]
//! whose endpoints are exact dyadic rationals, rounded outward.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Fractional bits carried by enclosures unless a caller asks otherwise.
pub const DEFAULT_FRAC_BITS: u32 = 256;

/// An exact number `mant · 2^exp`.
///
/// Kept normalized: the mantissa is odd, or the value is zero with `exp = 0`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Dyadic {
    mant: BigInt,
    exp: i64,
}

impl Dyadic {
    pub fn new(mant: BigInt, exp: i64) -> Self {
        match mant.trailing_zeros() {
            None => Self::zero(),
            Some(tz) => Dyadic {
                mant: mant >> tz,
                exp: exp + tz as i64,
            },
        }
    }

    pub fn zero() -> Self {
        Dyadic {
            mant: BigInt::zero(),
            exp: 0,
        }
    }

    pub fn one() -> Self {
        Dyadic::from_int(1)
    }

    pub fn from_int(v: i64) -> Self {
        Dyadic::new(BigInt::from(v), 0)
    }

    pub fn from_biguint(v: &BigUint) -> Self {
        Dyadic::new(BigInt::from(v.clone()), 0)
    }

    pub fn pow2(exp: i64) -> Self {
        Dyadic {
            mant: BigInt::one(),
            exp,
        }
    }

    /// Exact conversion; every finite double is a dyadic rational.
    pub fn from_f64(v: f64) -> Result<Self> {
        if !v.is_finite() {
            return Err(Error::Domain(format!("{v} is not a finite number")));
        }
        if v == 0.0 {
            return Ok(Self::zero());
        }
        let bits = v.to_bits();
        let sign = if bits >> 63 == 0 { 1i64 } else { -1 };
        let raw_exp = ((bits >> 52) & 0x7ff) as i64;
        let frac = bits & 0x000f_ffff_ffff_ffff;
        let (mant, exp) = if raw_exp == 0 {
            (frac as i64, -1074)
        } else {
            ((frac | (1u64 << 52)) as i64, raw_exp - 1075)
        };
        Ok(Dyadic::new(BigInt::from(sign * mant), exp))
    }

    pub fn mantissa(&self) -> &BigInt {
        &self.mant
    }

    pub fn exponent(&self) -> i64 {
        self.exp
    }

    pub fn is_zero(&self) -> bool {
        self.mant.is_zero()
    }

    pub fn is_positive(&self) -> bool {
        self.mant.is_positive()
    }

    pub fn is_negative(&self) -> bool {
        self.mant.is_negative()
    }

    pub fn neg(&self) -> Self {
        Dyadic {
            mant: -&self.mant,
            exp: self.exp,
        }
    }

    pub fn add(&self, other: &Dyadic) -> Self {
        if self.is_zero() {
            return other.clone();
        }
        if other.is_zero() {
            return self.clone();
        }
        let e = self.exp.min(other.exp);
        let a = &self.mant << (self.exp - e) as usize;
        let b = &other.mant << (other.exp - e) as usize;
        Dyadic::new(a + b, e)
    }

    pub fn sub(&self, other: &Dyadic) -> Self {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Dyadic) -> Self {
        Dyadic::new(&self.mant * &other.mant, self.exp + other.exp)
    }

    /// Multiplication by `2^k`.
    pub fn shl(&self, k: i64) -> Self {
        if self.is_zero() {
            return self.clone();
        }
        Dyadic {
            mant: self.mant.clone(),
            exp: self.exp + k,
        }
    }

    /// Largest multiple of `2^-bits` not above `self`.
    pub fn floor_to(&self, bits: u32) -> Self {
        let target = -(bits as i64);
        if self.exp >= target {
            return self.clone();
        }
        let shift = (target - self.exp) as usize;
        let q = self.mant.div_floor(&(BigInt::one() << shift));
        Dyadic::new(q, target)
    }

    /// Smallest multiple of `2^-bits` not below `self`.
    pub fn ceil_to(&self, bits: u32) -> Self {
        self.neg().floor_to(bits).neg()
    }

    /// `floor(num / den)` on the `2^-bits` grid. `den` must be non-zero.
    pub fn ratio_floor(num: &BigInt, den: &BigInt, bits: u32) -> Self {
        let (num, den) = if den.is_negative() {
            (-num, -den)
        } else {
            (num.clone(), den.clone())
        };
        let q = (num << bits as usize).div_floor(&den);
        Dyadic::new(q, -(bits as i64))
    }

    /// `ceil(num / den)` on the `2^-bits` grid. `den` must be non-zero.
    pub fn ratio_ceil(num: &BigInt, den: &BigInt, bits: u32) -> Self {
        Dyadic::ratio_floor(&-num, den, bits).neg()
    }

    pub fn rational_floor(r: &BigRational, bits: u32) -> Self {
        Dyadic::ratio_floor(r.numer(), r.denom(), bits)
    }

    pub fn rational_ceil(r: &BigRational, bits: u32) -> Self {
        Dyadic::ratio_ceil(r.numer(), r.denom(), bits)
    }

    /// `(num, den)` of `self / other` as integers, for exact division.
    fn quotient_parts(&self, other: &Dyadic) -> (BigInt, BigInt) {
        let e = self.exp - other.exp;
        if e >= 0 {
            (&self.mant << e as usize, other.mant.clone())
        } else {
            (self.mant.clone(), &other.mant << (-e) as usize)
        }
    }

    pub fn div_floor(&self, other: &Dyadic, bits: u32) -> Self {
        let (n, d) = self.quotient_parts(other);
        Dyadic::ratio_floor(&n, &d, bits)
    }

    pub fn div_ceil(&self, other: &Dyadic, bits: u32) -> Self {
        let (n, d) = self.quotient_parts(other);
        Dyadic::ratio_ceil(&n, &d, bits)
    }

    pub fn to_rational(&self) -> BigRational {
        if self.exp >= 0 {
            BigRational::from_integer(&self.mant << self.exp as usize)
        } else {
            BigRational::new(self.mant.clone(), BigInt::one() << (-self.exp) as usize)
        }
    }

    /// Smallest integer `>= self`.
    pub fn ceil_int(&self) -> BigInt {
        let c = self.ceil_to(0);
        &c.mant << c.exp.max(0) as usize
    }

    /// Nearest double; for display only.
    pub fn to_f64(&self) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let bits = self.mant.bits() as i64;
        let (m, e) = if bits > 60 {
            let s = bits - 60;
            (&self.mant >> s as usize, self.exp + s)
        } else {
            (self.mant.clone(), self.exp)
        };
        let m = m.to_f64().unwrap_or(f64::NAN);
        let e = e.clamp(-2200, 2200) as i32;
        if e.abs() > 1000 {
            m * 2f64.powi(e / 2) * 2f64.powi(e - e / 2)
        } else {
            m * 2f64.powi(e)
        }
    }
}

impl Ord for Dyadic {
    fn cmp(&self, other: &Self) -> Ordering {
        let e = self.exp.min(other.exp);
        let a = &self.mant << (self.exp - e) as usize;
        let b = &other.mant << (other.exp - e) as usize;
        a.cmp(&b)
    }
}

impl PartialOrd for Dyadic {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.exp == 0 {
            write!(f, "{}", self.mant)
        } else {
            write!(f, "{}*2^{}", self.mant, self.exp)
        }
    }
}

impl FromStr for Dyadic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::Parse(format!("invalid dyadic literal {s:?}"));
        match s.split_once("*2^") {
            Some((m, e)) => {
                let mant: BigInt = m.parse().map_err(|_| bad())?;
                let exp: i64 = e.parse().map_err(|_| bad())?;
                Ok(Dyadic::new(mant, exp))
            }
            None => {
                let mant: BigInt = s.parse().map_err(|_| bad())?;
                Ok(Dyadic::new(mant, 0))
            }
        }
    }
}

impl Serialize for Dyadic {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Dyadic {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A certified enclosure `[lo, hi]` of a real number.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FloatInterval {
    lo: Dyadic,
    hi: Dyadic,
    frac_bits: u32,
}

impl FloatInterval {
    pub fn new(lo: Dyadic, hi: Dyadic, frac_bits: u32) -> Result<Self> {
        if lo > hi {
            return Err(Error::Precondition(format!(
                "interval endpoints out of order: {lo} > {hi}"
            )));
        }
        Ok(FloatInterval { lo, hi, frac_bits })
    }

    pub fn point(v: Dyadic, frac_bits: u32) -> Self {
        FloatInterval {
            lo: v.clone(),
            hi: v,
            frac_bits,
        }
    }

    pub fn from_int(v: i64, frac_bits: u32) -> Self {
        Self::point(Dyadic::from_int(v), frac_bits)
    }

    /// Tightest enclosure of `r` on the `2^-frac_bits` grid.
    pub fn from_rational(r: &BigRational, frac_bits: u32) -> Self {
        FloatInterval {
            lo: Dyadic::rational_floor(r, frac_bits),
            hi: Dyadic::rational_ceil(r, frac_bits),
            frac_bits,
        }
    }

    pub fn lo(&self) -> &Dyadic {
        &self.lo
    }

    pub fn hi(&self) -> &Dyadic {
        &self.hi
    }

    pub fn frac_bits(&self) -> u32 {
        self.frac_bits
    }

    pub fn width(&self) -> Dyadic {
        self.hi.sub(&self.lo)
    }

    pub fn is_exact(&self) -> bool {
        self.lo == self.hi
    }

    pub fn contains(&self, r: &BigRational) -> bool {
        &self.lo.to_rational() <= r && r <= &self.hi.to_rational()
    }

    /// Midpoint as a double, for human-readable output only.
    pub fn approx(&self) -> f64 {
        self.lo.add(&self.hi).shl(-1).to_f64()
    }

    fn rounded(lo: Dyadic, hi: Dyadic, frac_bits: u32) -> Self {
        FloatInterval {
            lo: lo.floor_to(frac_bits),
            hi: hi.ceil_to(frac_bits),
            frac_bits,
        }
    }

    pub fn neg(&self) -> Self {
        FloatInterval {
            lo: self.hi.neg(),
            hi: self.lo.neg(),
            frac_bits: self.frac_bits,
        }
    }

    pub fn add(&self, other: &FloatInterval) -> Self {
        let bits = self.frac_bits.max(other.frac_bits);
        Self::rounded(self.lo.add(&other.lo), self.hi.add(&other.hi), bits)
    }

    pub fn sub(&self, other: &FloatInterval) -> Self {
        self.add(&other.neg())
    }

    pub fn add_int(&self, v: i64) -> Self {
        self.add(&FloatInterval::from_int(v, self.frac_bits))
    }

    pub fn shl(&self, k: i64) -> Self {
        Self::rounded(self.lo.shl(k), self.hi.shl(k), self.frac_bits)
    }

    pub fn mul(&self, other: &FloatInterval) -> Self {
        let bits = self.frac_bits.max(other.frac_bits);
        let products = [
            self.lo.mul(&other.lo),
            self.lo.mul(&other.hi),
            self.hi.mul(&other.lo),
            self.hi.mul(&other.hi),
        ];
        let lo = products.iter().min().cloned().unwrap_or_else(Dyadic::zero);
        let hi = products.iter().max().cloned().unwrap_or_else(Dyadic::zero);
        Self::rounded(lo, hi, bits)
    }

    /// Division by an interval that lies strictly above zero.
    pub fn div(&self, other: &FloatInterval) -> Result<Self> {
        if !other.lo.is_positive() {
            return Err(Error::Domain(
                "interval division requires a strictly positive divisor".into(),
            ));
        }
        let bits = self.frac_bits.max(other.frac_bits);
        let pairs = [
            (&self.lo, &other.lo),
            (&self.lo, &other.hi),
            (&self.hi, &other.lo),
            (&self.hi, &other.hi),
        ];
        let lo = pairs.iter().map(|(a, b)| a.div_floor(b, bits)).min();
        let hi = pairs.iter().map(|(a, b)| a.div_ceil(b, bits)).max();
        match (lo, hi) {
            (Some(lo), Some(hi)) => Ok(FloatInterval {
                lo,
                hi,
                frac_bits: bits,
            }),
            _ => unreachable!("four candidate quotients"),
        }
    }

    pub fn div_int(&self, d: u64) -> Result<Self> {
        self.div(&FloatInterval::from_int(d as i64, self.frac_bits))
    }

    /// `true` when every point of `self` is strictly below every point of `other`.
    pub fn certainly_lt(&self, other: &FloatInterval) -> bool {
        self.hi < other.lo
    }

    pub fn certainly_le(&self, other: &FloatInterval) -> bool {
        self.hi <= other.lo
    }

    /// Enclosure of `log2` over a strictly positive interval.
    pub fn log2(&self) -> Result<Self> {
        let lo = log2_dyadic(&self.lo, self.frac_bits)?;
        let hi = log2_dyadic(&self.hi, self.frac_bits)?;
        Ok(FloatInterval {
            lo: lo.lo,
            hi: hi.hi,
            frac_bits: self.frac_bits,
        })
    }

    /// Enclosure of the natural logarithm over a strictly positive interval.
    pub fn ln(&self) -> Result<Self> {
        let ln2 = ln2_interval(self.frac_bits);
        let lo = log2_dyadic(&self.lo, self.frac_bits)?.mul(&ln2);
        let hi = log2_dyadic(&self.hi, self.frac_bits)?.mul(&ln2);
        Ok(FloatInterval {
            lo: lo.lo,
            hi: hi.hi,
            frac_bits: self.frac_bits,
        })
    }
}

impl fmt::Display for FloatInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}] (~{:.6})", self.lo, self.hi, self.approx())
    }
}

fn ceil_shift(v: &BigUint, s: u64) -> BigUint {
    let q = v >> s;
    if (&q << s) == *v {
        q
    } else {
        q + 1u32
    }
}

/// Enclosure of `log2(x)` for a positive integer, width at most `2^-frac_bits`.
///
/// Powers of two come back as exact points. Otherwise the mantissa
/// `y = x / 2^n ∈ (1, 2)` is squared repeatedly with its lower bound rounded
/// down and its upper bound rounded up, emitting one binary digit of the
/// logarithm per step.
pub fn log2_interval(x: &BigUint, frac_bits: u32) -> Result<FloatInterval> {
    if x.is_zero() {
        return Err(Error::Domain("log2 of zero".into()));
    }
    let n = x.bits() - 1;
    if x.trailing_zeros() == Some(n) {
        return Ok(FloatInterval::from_int(n as i64, frac_bits));
    }
    let steps = frac_bits as u64 + 1;
    let prec = steps + 64;
    let (mut lo, mut hi) = if prec >= n {
        let v = x << (prec - n);
        (v.clone(), v)
    } else {
        let v = x >> (n - prec);
        let up = ceil_shift(x, n - prec);
        (v, up)
    };
    let two = BigUint::one() << (prec + 1);
    let mut digits = BigUint::zero();
    for _ in 0..steps {
        lo = (&lo * &lo) >> prec;
        hi = ceil_shift(&(&hi * &hi), prec);
        digits <<= 1;
        if lo >= two {
            digits |= BigUint::one();
            lo >>= 1;
            hi = ceil_shift(&hi, 1);
        }
    }
    // log2 x = n + (digits + log2 Y) / 2^steps with 1 <= Y <= hi / 2^prec.
    let extra = ((&hi - 1u32).bits()).saturating_sub(prec);
    let base = (BigUint::from(n) << steps) + &digits;
    let lo_d = Dyadic::new(BigInt::from(base.clone()), -(steps as i64));
    let hi_d = Dyadic::new(BigInt::from(base + extra), -(steps as i64));
    FloatInterval::new(lo_d, hi_d, frac_bits)
}

/// Enclosure of `log2(d)` for a strictly positive dyadic.
pub fn log2_dyadic(d: &Dyadic, frac_bits: u32) -> Result<FloatInterval> {
    if !d.is_positive() {
        return Err(Error::Domain(format!("log2 of non-positive value {d}")));
    }
    let mant = d.mantissa().magnitude();
    Ok(log2_interval(mant, frac_bits)?.add_int(d.exponent()))
}

/// Enclosure of `log2(r)` for a strictly positive rational.
pub fn log2_rational(r: &BigRational, frac_bits: u32) -> Result<FloatInterval> {
    if !r.is_positive() {
        return Err(Error::Domain(format!("log2 of non-positive value {r}")));
    }
    let num = log2_interval(r.numer().magnitude(), frac_bits)?;
    let den = log2_interval(r.denom().magnitude(), frac_bits)?;
    Ok(num.sub(&den))
}

/// Enclosure of `ln 2` from the series `Σ 1/(k·2^k)`.
pub fn ln2_interval(frac_bits: u32) -> FloatInterval {
    let g = frac_bits as u64 + 16;
    let mut sum = BigUint::zero();
    for k in 1..=g {
        sum += (BigUint::one() << (g - k)) / BigUint::from(k);
    }
    // each term loses < 1 ulp to truncation; the tail past k = g is < 1 ulp
    let hi = &sum + BigUint::from(g + 1);
    let lo_d = Dyadic::new(BigInt::from(sum), -(g as i64));
    let hi_d = Dyadic::new(BigInt::from(hi), -(g as i64));
    FloatInterval::rounded(lo_d, hi_d, frac_bits)
}

/// Enclosure of the real `n`-th root of a non-negative rational.
///
/// Uses an exact integer root of `x · 2^(n·frac_bits)`, so the enclosure is
/// a single point whenever the root is itself on the grid.
pub fn root_interval(x: &BigRational, n: u32, frac_bits: u32) -> Result<FloatInterval> {
    if n == 0 {
        return Err(Error::Domain("zeroth root".into()));
    }
    if x.is_negative() {
        return Err(Error::Domain(format!("root of negative value {x}")));
    }
    let num = x.numer().magnitude();
    let den = x.denom().magnitude();
    let scaled = num << (n as u64 * frac_bits as u64);
    let (quot, rem) = scaled.div_rem(den);
    let root = quot.nth_root(n);
    let exact = rem.is_zero() && root.pow(n) == quot;
    let lo = Dyadic::new(BigInt::from_biguint(Sign::Plus, root.clone()), -(frac_bits as i64));
    let hi = if exact {
        lo.clone()
    } else {
        Dyadic::new(BigInt::from(root + 1u32), -(frac_bits as i64))
    };
    FloatInterval::new(lo, hi, frac_bits)
}
