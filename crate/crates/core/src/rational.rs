//! Exact rationals. Every distance, density and threshold in the crate is one
//! of these; the text form is always `num/den`, even for integers.

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};

pub type Rational = num_rational::BigRational;

pub fn ratio(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

pub fn from_int(v: i64) -> Rational {
    Rational::from_integer(BigInt::from(v))
}

pub fn format_rational(r: &Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Accepts `num/den` or a bare integer.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    let bad = || Error::Parse(format!("malformed rational {s:?}"));
    let (n, d) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (s, "1"),
    };
    let n: BigInt = n.parse().map_err(|_| bad())?;
    let d: BigInt = d.parse().map_err(|_| bad())?;
    if d.is_zero() {
        return Err(bad());
    }
    Ok(Rational::new(n, d))
}

/// `ceil(r)` for a non-negative rational, as a big integer.
pub(crate) fn ceil_nonneg(r: &Rational) -> BigInt {
    debug_assert!(!r.is_negative());
    r.ceil().to_integer()
}

pub(crate) fn floor_nonneg(r: &Rational) -> BigInt {
    r.floor().to_integer()
}

pub(crate) fn is_unit_interval(r: &Rational) -> bool {
    r.is_positive() && *r <= Rational::one()
}

/// Lossy conversion used only for reporting magnitudes.
pub fn approx_f64(r: &Rational) -> f64 {
    use num_traits::ToPrimitive;
    r.to_f64().unwrap_or(f64::NAN)
}
