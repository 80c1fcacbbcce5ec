//! Scalar field abstraction: exact rationals or `f64`.

use std::fmt;
use std::str::FromStr;

use num_bigint::{BigInt, Sign};
use num_rational::BigRational;
use num_traits::{FromPrimitive, One, Signed, ToPrimitive, Zero};
use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

/// Field used for vector entries and exact products.
pub trait Scalar:
    Clone + fmt::Debug + PartialEq + Send + Sync + Signed + 'static
{
    fn from_ratio(r: &BigRational) -> Self;
    /// Nearest value to `v`; exact for rationals, `0` for non-finite input.
    fn from_f64(v: f64) -> Self;
    fn to_f64(&self) -> f64;
    /// `ln |self|`, `-inf` for zero.
    fn ln_abs(&self) -> f64;
    const EXACT: bool;
}

impl Scalar for f64 {
    fn from_ratio(r: &BigRational) -> Self {
        ratio_to_f64(r)
    }
    fn from_f64(v: f64) -> Self {
        v
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn ln_abs(&self) -> f64 {
        self.abs().ln()
    }
    const EXACT: bool = false;
}

impl Scalar for BigRational {
    fn from_ratio(r: &BigRational) -> Self {
        r.clone()
    }
    fn from_f64(v: f64) -> Self {
        <BigRational as FromPrimitive>::from_f64(v).unwrap_or_else(BigRational::zero)
    }
    fn to_f64(&self) -> f64 {
        ratio_to_f64(self)
    }
    fn ln_abs(&self) -> f64 {
        ratio_ln_abs(self)
    }
    const EXACT: bool = true;
}

/// `ln |n|` for arbitrarily large integers, accurate to f64 precision.
pub fn bigint_ln_abs(n: &BigInt) -> f64 {
    if n.is_zero() {
        return f64::NEG_INFINITY;
    }
    let bits = n.bits();
    if bits <= 1000 {
        if let Some(v) = n.abs().to_f64() {
            return v.ln();
        }
    }
    let shift = bits - 64;
    let top = (n.abs() >> shift).to_f64().unwrap_or(f64::INFINITY);
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

pub fn ratio_ln_abs(r: &BigRational) -> f64 {
    if r.is_zero() {
        return f64::NEG_INFINITY;
    }
    bigint_ln_abs(r.numer()) - bigint_ln_abs(r.denom())
}

/// Nearest-ish f64; saturates to `±inf` / `0` outside the f64 range.
pub fn ratio_to_f64(r: &BigRational) -> f64 {
    if r.is_zero() {
        return 0.0;
    }
    if let (Some(n), Some(d)) = (r.numer().to_f64(), r.denom().to_f64()) {
        if n.is_finite() && d.is_finite() && d != 0.0 {
            return n / d;
        }
    }
    let sign = if r.numer().sign() == Sign::Minus { -1.0 } else { 1.0 };
    sign * ratio_ln_abs(r).exp()
}

/// Exact number as written in configuration files: an integer, a decimal
/// (converted exactly from its binary value), or a `"p/q"` string.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct ExactNumber(pub BigRational);

impl ExactNumber {
    pub fn from_integer(v: i64) -> Self {
        ExactNumber(BigRational::from_integer(BigInt::from(v)))
    }

    pub fn ratio(&self) -> &BigRational {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn to_f64(&self) -> f64 {
        ratio_to_f64(&self.0)
    }
}

impl fmt::Debug for ExactNumber {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for ExactNumber {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl FromStr for ExactNumber {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if let Some((n, d)) = s.split_once('/') {
            let n: BigInt = n.trim().parse().map_err(|_| format!("bad numerator in {s:?}"))?;
            let d: BigInt = d.trim().parse().map_err(|_| format!("bad denominator in {s:?}"))?;
            if d.is_zero() {
                return Err(format!("zero denominator in {s:?}"));
            }
            return Ok(ExactNumber(BigRational::new(n, d)));
        }
        if let Ok(i) = s.parse::<BigInt>() {
            return Ok(ExactNumber(BigRational::from_integer(i)));
        }
        let f: f64 = s.parse().map_err(|_| format!("not a number: {s:?}"))?;
        <BigRational as FromPrimitive>::from_f64(f)
            .map(ExactNumber)
            .ok_or_else(|| format!("not a finite number: {s:?}"))
    }
}

impl Serialize for ExactNumber {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        if self.0.is_integer() {
            if let Some(i) = self.0.numer().to_i64() {
                return serializer.serialize_i64(i);
            }
        }
        serializer.serialize_str(&self.0.to_string())
    }
}

impl<'de> Deserialize<'de> for ExactNumber {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(i64),
            Float(f64),
            Text(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Int(i) => Ok(ExactNumber::from_integer(i)),
            Raw::Float(f) => <BigRational as FromPrimitive>::from_f64(f)
                .map(ExactNumber)
                .ok_or_else(|| de::Error::custom("non-finite number")),
            Raw::Text(s) => s.parse().map_err(de::Error::custom),
        }
    }
}

/// `base^exp` for signed exponents.
pub fn ratio_pow(base: &BigRational, exp: i64) -> BigRational {
    if exp == 0 {
        return BigRational::one();
    }
    let mag = num_traits::pow::pow(base.clone(), exp.unsigned_abs() as usize);
    if exp < 0 {
        mag.recip()
    } else {
        mag
    }
}
