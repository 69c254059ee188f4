//! Exact rational time values.
//!
//! Every duration, start time and makespan in the crate is a [`Rational`].
//! The representation is a reduced `i128` fraction; arithmetic is checked and
//! panics with `"rational overflow"` instead of silently wrapping.

use std::cmp::Ordering;
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{CheckedAdd, CheckedDiv, CheckedMul, CheckedSub, Signed, ToPrimitive, Zero};
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Number of significant digits used for display-only decimal renderings.
pub const DECIMAL_DIGITS: usize = 15;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseRationalError {
    #[error("empty rational literal")]
    Empty,
    #[error("invalid rational literal `{0}`")]
    Invalid(String),
    #[error("zero denominator in `{0}`")]
    ZeroDenominator(String),
    #[error("rational literal `{0}` is out of range")]
    OutOfRange(String),
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Rational(Ratio<i128>);

impl Rational {
    pub fn new(numer: i128, denom: i128) -> Self {
        assert!(denom != 0, "zero denominator");
        Rational(Ratio::new(numer, denom))
    }

    pub fn from_integer(value: i128) -> Self {
        Rational(Ratio::from_integer(value))
    }

    pub fn zero() -> Self {
        Rational(Ratio::zero())
    }

    pub fn one() -> Self {
        Rational::from_integer(1)
    }

    pub fn numer(&self) -> i128 {
        *self.0.numer()
    }

    pub fn denom(&self) -> i128 {
        *self.0.denom()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    pub fn is_integer(&self) -> bool {
        self.0.is_integer()
    }

    /// Multiplies by the integer ratio `numer / denom`.
    pub fn scale(self, numer: u64, denom: u64) -> Self {
        self * Rational::new(numer as i128, denom as i128)
    }

    pub fn recip(self) -> Self {
        assert!(!self.is_zero(), "reciprocal of zero");
        Rational(self.0.recip())
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    pub fn checked_add(&self, rhs: &Self) -> Option<Self> {
        self.0.checked_add(&rhs.0).map(Rational)
    }

    pub fn checked_sub(&self, rhs: &Self) -> Option<Self> {
        self.0.checked_sub(&rhs.0).map(Rational)
    }

    pub fn checked_mul(&self, rhs: &Self) -> Option<Self> {
        self.0.checked_mul(&rhs.0).map(Rational)
    }

    pub fn checked_div(&self, rhs: &Self) -> Option<Self> {
        self.0.checked_div(&rhs.0).map(Rational)
    }

    /// Floor of the value as an integer.
    pub fn floor(&self) -> i128 {
        Integer::div_floor(&self.numer(), &self.denom())
    }

    /// Ceiling of the value as an integer.
    pub fn ceil(&self) -> i128 {
        Integer::div_ceil(&self.numer(), &self.denom())
    }

    /// Decimal rendering rounded half-up to `digits` significant digits,
    /// trailing zeros trimmed.
    pub fn to_decimal(&self, digits: usize) -> String {
        assert!(digits > 0);
        if self.is_zero() {
            return "0".to_owned();
        }
        let negative = self.is_negative();
        let numer = BigInt::from(self.numer().abs());
        let denom = BigInt::from(self.denom());
        let ten = BigInt::from(10u8);
        let lower = ten.pow(digits as u32 - 1);
        let upper = &lower * &ten;

        // scaled = round(value * 10^shift) lands in [10^(digits-1), 10^digits)
        let magnitude = numer.to_string().len() as i64 - denom.to_string().len() as i64;
        let mut shift = digits as i64 - 1 - magnitude;
        let scaled = loop {
            let (n, d) = if shift >= 0 {
                (&numer * ten.pow(shift as u32), denom.clone())
            } else {
                (numer.clone(), &denom * ten.pow((-shift) as u32))
            };
            let two = BigInt::from(2u8);
            let rounded: BigInt = (&two * n + &d) / (&two * d);
            if rounded >= upper {
                shift -= 1;
            } else if rounded < lower {
                shift += 1;
            } else {
                break rounded;
            }
        };

        let digits_str = scaled.to_string();
        let point = digits_str.len() as i64 - shift;
        let mut out = String::new();
        if negative {
            out.push('-');
        }
        if point <= 0 {
            out.push_str("0.");
            out.extend(std::iter::repeat_n('0', (-point) as usize));
            out.push_str(&digits_str);
        } else if point as usize >= digits_str.len() {
            out.push_str(&digits_str);
            out.extend(std::iter::repeat_n('0', point as usize - digits_str.len()));
        } else {
            out.push_str(&digits_str[..point as usize]);
            out.push('.');
            out.push_str(&digits_str[point as usize..]);
        }
        if out.contains('.') {
            let trimmed = out.trim_end_matches('0').trim_end_matches('.').len();
            out.truncate(trimmed);
        }
        out
    }

    /// Default display decimal ([`DECIMAL_DIGITS`] significant digits).
    pub fn decimal(&self) -> String {
        self.to_decimal(DECIMAL_DIGITS)
    }
}

impl PartialOrd for Rational {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Rational {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.cmp(&other.0)
    }
}

impl From<i128> for Rational {
    fn from(value: i128) -> Self {
        Rational::from_integer(value)
    }
}

impl From<u32> for Rational {
    fn from(value: u32) -> Self {
        Rational::from_integer(value as i128)
    }
}

impl From<i32> for Rational {
    fn from(value: i32) -> Self {
        Rational::from_integer(value as i128)
    }
}

impl Add for Rational {
    type Output = Rational;
    fn add(self, rhs: Self) -> Self {
        self.checked_add(&rhs).expect("rational overflow")
    }
}

impl Sub for Rational {
    type Output = Rational;
    fn sub(self, rhs: Self) -> Self {
        self.checked_sub(&rhs).expect("rational overflow")
    }
}

impl Mul for Rational {
    type Output = Rational;
    fn mul(self, rhs: Self) -> Self {
        self.checked_mul(&rhs).expect("rational overflow")
    }
}

impl Div for Rational {
    type Output = Rational;
    fn div(self, rhs: Self) -> Self {
        assert!(!rhs.is_zero(), "division by zero");
        self.checked_div(&rhs).expect("rational overflow")
    }
}

impl Neg for Rational {
    type Output = Rational;
    fn neg(self) -> Self {
        Rational(-self.0)
    }
}

impl AddAssign for Rational {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl SubAssign for Rational {
    fn sub_assign(&mut self, rhs: Self) {
        *self = *self - rhs;
    }
}

impl Sum for Rational {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Rational::zero(), Add::add)
    }
}

impl<'a> Sum<&'a Rational> for Rational {
    fn sum<I: Iterator<Item = &'a Self>>(iter: I) -> Self {
        iter.fold(Rational::zero(), |acc, x| acc + *x)
    }
}

/// Exact form: `p` for integers, `p/q` otherwise.
impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_integer() {
            write!(f, "{}", self.numer())
        } else {
            write!(f, "{}/{}", self.numer(), self.denom())
        }
    }
}

impl fmt::Debug for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

fn parse_int(text: &str, whole: &str) -> Result<i128, ParseRationalError> {
    let digits = text.strip_prefix(['+', '-']).unwrap_or(text);
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return Err(ParseRationalError::Invalid(whole.to_owned()));
    }
    text.parse::<i128>()
        .map_err(|_| ParseRationalError::OutOfRange(whole.to_owned()))
}

/// Accepts `p`, `p/q` and plain decimals such as `8.8` or `-0.25`.
impl FromStr for Rational {
    type Err = ParseRationalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let text = s.trim();
        if text.is_empty() {
            return Err(ParseRationalError::Empty);
        }
        if let Some((p, q)) = text.split_once('/') {
            let numer = parse_int(p.trim(), text)?;
            let denom = parse_int(q.trim(), text)?;
            if denom == 0 {
                return Err(ParseRationalError::ZeroDenominator(text.to_owned()));
            }
            return Ok(Rational::new(numer, denom));
        }
        if let Some((int_part, frac_part)) = text.split_once('.') {
            if frac_part.is_empty() || !frac_part.bytes().all(|b| b.is_ascii_digit()) {
                return Err(ParseRationalError::Invalid(text.to_owned()));
            }
            let negative = int_part.starts_with('-');
            let int_digits = int_part.strip_prefix(['+', '-']).unwrap_or(int_part);
            let whole = if int_digits.is_empty() {
                0
            } else {
                parse_int(int_digits, text)?
            };
            let frac = parse_int(frac_part, text)?;
            let denom = 10i128
                .checked_pow(frac_part.len() as u32)
                .ok_or_else(|| ParseRationalError::OutOfRange(text.to_owned()))?;
            let magnitude = whole
                .checked_mul(denom)
                .and_then(|w| w.checked_add(frac))
                .ok_or_else(|| ParseRationalError::OutOfRange(text.to_owned()))?;
            let numer = if negative { -magnitude } else { magnitude };
            return Ok(Rational::new(numer, denom));
        }
        Ok(Rational::from_integer(parse_int(text, text)?))
    }
}

impl Serialize for Rational {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

struct RationalVisitor;

impl<'de> Visitor<'de> for RationalVisitor {
    type Value = Rational;

    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str("an integer, a decimal string or a \"p/q\" string")
    }

    fn visit_str<E: de::Error>(self, v: &str) -> Result<Rational, E> {
        v.parse().map_err(E::custom)
    }

    fn visit_i64<E: de::Error>(self, v: i64) -> Result<Rational, E> {
        Ok(Rational::from_integer(v as i128))
    }

    fn visit_u64<E: de::Error>(self, v: u64) -> Result<Rational, E> {
        Ok(Rational::from_integer(v as i128))
    }

    fn visit_f64<E: de::Error>(self, v: f64) -> Result<Rational, E> {
        // shortest round-trip text of the float is taken as the intended decimal
        if !v.is_finite() {
            return Err(E::custom("non-finite duration"));
        }
        format!("{v}").parse().map_err(E::custom)
    }
}

impl<'de> Deserialize<'de> for Rational {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        deserializer.deserialize_any(RationalVisitor)
    }
}

/// Exact and decimal renderings side by side, for reports.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RationalText {
    pub exact: String,
    pub decimal: String,
}

impl From<Rational> for RationalText {
    fn from(value: Rational) -> Self {
        RationalText {
            exact: value.to_string(),
            decimal: value.decimal(),
        }
    }
}
