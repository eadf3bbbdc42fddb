//! Exact rational helpers.
//!
//! Probabilities and reward values live as [`BigRational`] from parse time
//! until the numerical checker converts them to `f64`, so sum-to-one checks
//! are exact and independent of evaluation order.

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, ToPrimitive, Zero};

/// Parses a decimal literal (`"0.59"`, `"1"`, `"12.5"`) into an exact
/// rational (`59/100`, `1`, `25/2`).
pub fn rational_from_decimal(text: &str) -> Option<BigRational> {
    let (int_part, frac_part) = match text.split_once('.') {
        Some((i, f)) => (i, f),
        None => (text, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().all(|c| c.is_ascii_digit()) || !frac_part.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits: String = format!("{int_part}{frac_part}");
    let numer: BigInt = digits.parse().ok()?;
    let denom = BigInt::from(10u32).pow(frac_part.len() as u32);
    Some(BigRational::new(numer, denom))
}

/// Formats a rational as an integer when the denominator is 1 and as
/// `num/den` otherwise (`1`, `59/100`, `1/2`).
pub fn format_rational(r: &BigRational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Rounds to the nearest integer with ties away from zero (4.5 -> 5,
/// -4.5 -> -5).
pub fn round_half_away(r: &BigRational) -> BigInt {
    let two = BigInt::from(2);
    let shifted = r * BigRational::from_integer(two.clone());
    let numer = shifted.numer();
    let denom = shifted.denom();
    // floor((2r + 1) / 2) for r >= 0, mirrored for r < 0.
    if r.is_negative() {
        -round_half_away(&-r)
    } else {
        (numer + denom) / (two * denom)
    }
}

/// Lossy conversion for the numerical checker.
pub fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        if r.is_negative() {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        }
    })
}

pub fn zero() -> BigRational {
    BigRational::zero()
}

pub fn one() -> BigRational {
    BigRational::one()
}

pub fn from_int(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}
