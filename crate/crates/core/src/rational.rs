//! Arbitrary-precision rationals and the small helpers the rest of the crate leans on.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::ParseError;

/// Exact rational number; numerator/denominator are kept coprime with a positive denominator.
pub type Rational = num_rational::BigRational;

/// Builds `num / den` (panics on a zero denominator).
pub fn rat(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

/// Integer as a rational.
pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// Fractional part in `[0, 1)`.
pub fn frac_part(q: &Rational) -> Rational {
    q - q.floor()
}

/// True when `q` is an integer.
pub fn is_integer(q: &Rational) -> bool {
    q.is_integer()
}

/// Converts an integral rational to `i64`; `None` when not integral or out of range.
pub fn to_i64(q: &Rational) -> Option<i64> {
    if q.is_integer() {
        q.to_integer().to_i64()
    } else {
        None
    }
}

/// `q` rounded down to an integer.
pub fn floor_i64(q: &Rational) -> i64 {
    q.floor().to_integer().to_i64().expect("exponent out of i64 range")
}

/// `q` rounded up to an integer.
pub fn ceil_i64(q: &Rational) -> i64 {
    q.ceil().to_integer().to_i64().expect("exponent out of i64 range")
}

/// Denominator as `u64`.
pub fn denom_u64(q: &Rational) -> u64 {
    q.denom().to_u64().expect("denominator out of range")
}

/// Least common multiple of two positive integers.
pub fn lcm_u64(a: u64, b: u64) -> u64 {
    a.lcm(&b)
}

/// Canonical text form: `n` or `n/d`.
pub fn format_rational(q: &Rational) -> String {
    if q.is_integer() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

/// Parses `n`, `-n`, `n/d`.
pub fn parse_rational(s: &str) -> Result<Rational, ParseError> {
    let s = s.trim();
    let bad = || ParseError::Rational(s.to_string());
    match s.split_once('/') {
        Some((n, d)) => {
            let n: BigInt = n.trim().parse().map_err(|_| bad())?;
            let d: BigInt = d.trim().parse().map_err(|_| bad())?;
            if d.is_zero() {
                return Err(bad());
            }
            Ok(Rational::new(n, d))
        }
        None => {
            let n: BigInt = s.parse().map_err(|_| bad())?;
            Ok(Rational::from_integer(n))
        }
    }
}

/// Generalized binomial coefficient `binom(r, k)` for rational `r`.
pub fn binom(r: &Rational, k: u64) -> Rational {
    let mut acc = Rational::one();
    for j in 0..k {
        acc = acc * (r - Rational::from_integer(BigInt::from(j))) / Rational::from_integer(BigInt::from(j + 1));
    }
    acc
}

/// `1 / k!`.
pub fn inv_factorial(k: u64) -> Rational {
    let mut f = BigInt::one();
    for j in 2..=k {
        f *= j;
    }
    Rational::new(BigInt::one(), f)
}

/// `(-1)^k` as a rational.
pub fn sign(k: u64) -> Rational {
    if k % 2 == 0 {
        Rational::one()
    } else {
        -Rational::one()
    }
}

/// Absolute value helper kept here so callers need not import `Signed`.
pub fn abs(q: &Rational) -> Rational {
    q.abs()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_format_round_trip() {
        for s in ["0", "3", "-7", "1/2", "-5/16"] {
            assert_eq!(format_rational(&parse_rational(s).unwrap()), s);
        }
        assert_eq!(parse_rational("4/8").unwrap(), rat(1, 2));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("x").is_err());
    }

    #[test]
    fn frac_part_is_in_unit_interval() {
        assert_eq!(frac_part(&rat(-1, 3)), rat(2, 3));
        assert_eq!(frac_part(&rat(7, 2)), rat(1, 2));
        assert_eq!(frac_part(&int(4)), int(0));
    }

    #[test]
    fn binomial_matches_integer_case() {
        assert_eq!(binom(&int(5), 2), int(10));
        assert_eq!(binom(&int(2), 3), int(0));
        assert_eq!(binom(&int(-1), 3), int(-1));
    }
}
