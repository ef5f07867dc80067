//! Scalars shared by formulas, instances and witnesses.
//!
//! Exact scalars are normalized rationals (`q > 0`, `gcd(|p|, q) = 1`, which
//! `num_rational` maintains for us). Float scalars are always finite: every
//! constructor that can produce a float goes through [`Scalar::float`].

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub type Rational = BigRational;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Exact,
    Float,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::Exact => f.write_str("exact"),
            Mode::Float => f.write_str("float"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScalarError {
    #[error("cannot parse `{0}` as a rational p/q")]
    Parse(String),
    #[error("zero denominator in `{0}`")]
    ZeroDenominator(String),
    #[error("non-finite float value {0}")]
    NonFinite(f64),
    #[error("mixed exact and float scalars")]
    ModeMismatch,
    #[error("division by zero")]
    DivisionByZero,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Scalar {
    Exact(Rational),
    Float(f64),
}

impl Scalar {
    pub fn exact(r: Rational) -> Self {
        Scalar::Exact(r)
    }

    pub fn integer(i: i64) -> Self {
        Scalar::Exact(Rational::from_integer(BigInt::from(i)))
    }

    /// Panics if `den == 0`.
    pub fn ratio(num: i64, den: i64) -> Self {
        Scalar::Exact(rational(num, den))
    }

    pub fn float(x: f64) -> Result<Self, ScalarError> {
        if x.is_finite() {
            Ok(Scalar::Float(x))
        } else {
            Err(ScalarError::NonFinite(x))
        }
    }

    pub fn zero(mode: Mode) -> Self {
        match mode {
            Mode::Exact => Scalar::Exact(Rational::zero()),
            Mode::Float => Scalar::Float(0.0),
        }
    }

    pub fn one(mode: Mode) -> Self {
        Self::from_i64(1, mode)
    }

    pub fn from_i64(i: i64, mode: Mode) -> Self {
        match mode {
            Mode::Exact => Scalar::integer(i),
            Mode::Float => Scalar::Float(i as f64),
        }
    }

    pub fn mode(&self) -> Mode {
        match self {
            Scalar::Exact(_) => Mode::Exact,
            Scalar::Float(_) => Mode::Float,
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Scalar::Exact(r) => r.is_zero(),
            Scalar::Float(x) => *x == 0.0,
        }
    }

    pub fn as_exact(&self) -> Option<&Rational> {
        match self {
            Scalar::Exact(r) => Some(r),
            Scalar::Float(_) => None,
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Scalar::Exact(r) => rational_to_f64(r),
            Scalar::Float(x) => *x,
        }
    }

    /// Converts to the requested mode. Float to exact is the exact binary value.
    pub fn to_mode(&self, mode: Mode) -> Scalar {
        match (self, mode) {
            (Scalar::Exact(_), Mode::Exact) | (Scalar::Float(_), Mode::Float) => self.clone(),
            (Scalar::Exact(r), Mode::Float) => Scalar::Float(rational_to_f64(r)),
            (Scalar::Float(x), Mode::Exact) => {
                Scalar::Exact(Rational::from_float(*x).expect("float scalars are finite"))
            }
        }
    }

    pub fn add(&self, other: &Scalar) -> Result<Scalar, ScalarError> {
        match (self, other) {
            (Scalar::Exact(a), Scalar::Exact(b)) => Ok(Scalar::Exact(a + b)),
            (Scalar::Float(a), Scalar::Float(b)) => Scalar::float(a + b),
            _ => Err(ScalarError::ModeMismatch),
        }
    }

    pub fn sub(&self, other: &Scalar) -> Result<Scalar, ScalarError> {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Scalar) -> Result<Scalar, ScalarError> {
        match (self, other) {
            (Scalar::Exact(a), Scalar::Exact(b)) => Ok(Scalar::Exact(a * b)),
            (Scalar::Float(a), Scalar::Float(b)) => Scalar::float(a * b),
            _ => Err(ScalarError::ModeMismatch),
        }
    }

    pub fn neg(&self) -> Scalar {
        match self {
            Scalar::Exact(r) => Scalar::Exact(-r),
            Scalar::Float(x) => Scalar::Float(-x),
        }
    }

    pub fn abs(&self) -> Scalar {
        match self {
            Scalar::Exact(r) => Scalar::Exact(r.abs()),
            Scalar::Float(x) => Scalar::Float(x.abs()),
        }
    }

    pub fn recip(&self) -> Result<Scalar, ScalarError> {
        if self.is_zero() {
            return Err(ScalarError::DivisionByZero);
        }
        match self {
            Scalar::Exact(r) => Ok(Scalar::Exact(r.recip())),
            Scalar::Float(x) => Scalar::float(1.0 / x),
        }
    }

    /// `self^exponent` for `exponent` in {+1, -1}.
    pub fn powi_unit(&self, inverse: bool) -> Result<Scalar, ScalarError> {
        if inverse {
            self.recip()
        } else {
            Ok(self.clone())
        }
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Exact(r) => f.write_str(&format_rational(r)),
            Scalar::Float(x) => write!(f, "{x}"),
        }
    }
}

impl FromStr for Scalar {
    type Err = ScalarError;

    /// Strings always parse as exact rationals.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_rational(s).map(Scalar::Exact)
    }
}

impl From<Rational> for Scalar {
    fn from(r: Rational) -> Self {
        Scalar::Exact(r)
    }
}

// Witness and assignment files: exact scalars are "p/q" strings, floats are numbers.
impl Serialize for Scalar {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Scalar::Exact(r) => serializer.serialize_str(&format_rational(r)),
            Scalar::Float(x) => serializer.serialize_f64(*x),
        }
    }
}

impl<'de> Deserialize<'de> for Scalar {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct ScalarVisitor;

        impl Visitor<'_> for ScalarVisitor {
            type Value = Scalar;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a rational string \"p/q\" or a finite number")
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<Scalar, E> {
                v.parse().map_err(E::custom)
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Scalar, E> {
                Scalar::float(v).map_err(E::custom)
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Scalar, E> {
                Ok(Scalar::Float(v as f64))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Scalar, E> {
                Ok(Scalar::Float(v as f64))
            }
        }

        deserializer.deserialize_any(ScalarVisitor)
    }
}

/// Panics if `den == 0`.
pub fn rational(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

pub fn rational_to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        // Ratio::to_f64 only fails on overflow.
        if r.is_negative() {
            f64::MIN
        } else {
            f64::MAX
        }
    })
}

/// Canonical text form: `p` when the denominator is one, otherwise `p/q`.
pub fn format_rational(r: &Rational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Accepts `p` or `p/q` with an optional leading `-` on `p`; normalizes.
pub fn parse_rational(text: &str) -> Result<Rational, ScalarError> {
    let s = text.trim();
    let (num, den) = match s.split_once('/') {
        Some((n, d)) => (n, Some(d)),
        None => (s, None),
    };
    let digits = |t: &str| !t.is_empty() && t.bytes().all(|b| b.is_ascii_digit());
    let unsigned = num.strip_prefix('-').unwrap_or(num);
    if !digits(unsigned) || !den.is_none_or(digits) {
        return Err(ScalarError::Parse(text.to_string()));
    }
    let p: BigInt = num.parse().map_err(|_| ScalarError::Parse(text.to_string()))?;
    let q: BigInt = match den {
        Some(d) => d.parse().map_err(|_| ScalarError::Parse(text.to_string()))?,
        None => BigInt::one(),
    };
    if q.is_zero() {
        return Err(ScalarError::ZeroDenominator(text.to_string()));
    }
    Ok(Rational::new(p, q))
}

/// Number types the evaluator and passes are generic over.
pub trait Numeric: Clone + fmt::Debug + PartialOrd + Signed + Send + Sync {
    const MODE: Mode;

    fn from_rational(r: &Rational) -> Self;

    /// `None` when `s` is in the other mode.
    fn from_scalar(s: &Scalar) -> Option<Self>;

    fn into_scalar(self) -> Scalar;
}

impl Numeric for Rational {
    const MODE: Mode = Mode::Exact;

    fn from_rational(r: &Rational) -> Self {
        r.clone()
    }

    fn from_scalar(s: &Scalar) -> Option<Self> {
        s.as_exact().cloned()
    }

    fn into_scalar(self) -> Scalar {
        Scalar::Exact(self)
    }
}

impl Numeric for f64 {
    const MODE: Mode = Mode::Float;

    fn from_rational(r: &Rational) -> Self {
        rational_to_f64(r)
    }

    fn from_scalar(s: &Scalar) -> Option<Self> {
        match s {
            Scalar::Float(x) => Some(*x),
            Scalar::Exact(_) => None,
        }
    }

    fn into_scalar(self) -> Scalar {
        Scalar::Float(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_normalizes() {
        assert_eq!(parse_rational("2/4").unwrap(), rational(1, 2));
        assert_eq!(parse_rational("-6/3").unwrap(), rational(-2, 1));
        assert_eq!(format_rational(&parse_rational("-6/3").unwrap()), "-2");
        assert_eq!(format_rational(&rational(3, -9)), "-1/3");
    }

    #[test]
    fn parse_rejects_garbage() {
        assert!(matches!(parse_rational("1/0"), Err(ScalarError::ZeroDenominator(_))));
        for bad in ["", "0.5", "1/-2", "--1", "a/b", "1/", "/2", "+3"] {
            assert!(matches!(parse_rational(bad), Err(ScalarError::Parse(_))), "{bad}");
        }
    }

    #[test]
    fn float_must_be_finite() {
        assert!(Scalar::float(f64::NAN).is_err());
        assert!(Scalar::float(f64::INFINITY).is_err());
        assert!(Scalar::float(1.5).is_ok());
    }

    #[test]
    fn arithmetic_rejects_mixed_modes() {
        let a = Scalar::integer(1);
        let b = Scalar::Float(1.0);
        assert_eq!(a.add(&b), Err(ScalarError::ModeMismatch));
        assert_eq!(Scalar::integer(0).recip(), Err(ScalarError::DivisionByZero));
        assert_eq!(Scalar::ratio(2, 3).recip().unwrap(), Scalar::ratio(3, 2));
    }

    #[test]
    fn serde_forms() {
        let exact: Scalar = serde_json::from_str("\"-7/14\"").unwrap();
        assert_eq!(exact, Scalar::ratio(-1, 2));
        assert_eq!(serde_json::to_string(&exact).unwrap(), "\"-1/2\"");
        let float: Scalar = serde_json::from_str("0.25").unwrap();
        assert_eq!(float, Scalar::Float(0.25));
        assert!(serde_json::from_str::<Scalar>("\"1/0\"").is_err());
    }
}
