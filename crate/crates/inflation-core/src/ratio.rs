//! Exact rational arithmetic helpers.
//!
//! All certificate-bearing computation in this crate uses arbitrary-precision
//! rationals; floats only appear in sampling and batch-evaluation paths.

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{FromPrimitive, One, Signed, ToPrimitive, Zero};

/// The exact scalar type used throughout the crate.
pub type Q = BigRational;

pub fn q(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

pub fn qfrac(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

pub fn to_f64(x: &Q) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Parses `"3"`, `"1/3"`, or a decimal like `"0.25"` into an exact rational.
pub fn parse_ratio(s: &str) -> Option<Q> {
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().ok()?;
        let d: BigInt = d.trim().parse().ok()?;
        if d.is_zero() {
            return None;
        }
        return Some(Q::new(n, d));
    }
    if let Ok(n) = s.parse::<BigInt>() {
        return Some(Q::from_integer(n));
    }
    // Decimal notation: keep it exact by scaling with a power of ten.
    if let Some((int, frac)) = s.split_once('.') {
        if frac.chars().all(|c| c.is_ascii_digit()) && !frac.is_empty() {
            let neg = int.trim_start().starts_with('-');
            let int: BigInt = if int.is_empty() || int == "-" {
                BigInt::zero()
            } else {
                int.parse().ok()?
            };
            let num: BigInt = frac.parse().ok()?;
            let den = BigInt::from(10u32).pow(frac.len() as u32);
            let frac_part = Q::new(num, den);
            let int_part = Q::from_integer(int);
            return Some(if neg { int_part - frac_part } else { int_part + frac_part });
        }
    }
    None
}

pub fn ratio_to_string(x: &Q) -> String {
    if x.denom().is_one() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

/// Converts a float into a nearby rational with denominator at most `max_den`,
/// via continued-fraction convergents.
pub fn rationalize(x: f64, max_den: u64) -> Q {
    if !x.is_finite() {
        return Q::zero();
    }
    let neg = x < 0.0;
    let mut x = x.abs();
    let (mut p0, mut q0, mut p1, mut q1) = (0i128, 1i128, 1i128, 0i128);
    for _ in 0..64 {
        let a = x.floor();
        if a >= i64::MAX as f64 {
            break;
        }
        let ai = a as i128;
        let p2 = ai * p1 + p0;
        let q2 = ai * q1 + q0;
        if q2 > max_den as i128 || q2 < 0 {
            break;
        }
        p0 = p1;
        q0 = q1;
        p1 = p2;
        q1 = q2;
        let frac = x - a;
        if frac < 1e-15 {
            break;
        }
        x = 1.0 / frac;
    }
    if q1 == 0 {
        return Q::zero();
    }
    let r = Q::new(BigInt::from(p1), BigInt::from(q1));
    if neg {
        -r
    } else {
        r
    }
}

/// Exact rational from a float's binary representation (dyadic, lossless).
pub fn from_f64_exact(x: f64) -> Option<Q> {
    Q::from_f64(x)
}

/// Scales a rational vector to integers with overall gcd 1. The sign of the
/// vector is preserved (the scale factor is positive).
pub fn integerize(v: &[Q]) -> Vec<BigInt> {
    let mut lcm = BigInt::one();
    for x in v {
        lcm = num::integer::lcm(lcm, x.denom().clone());
    }
    let mut ints: Vec<BigInt> = v.iter().map(|x| x.numer() * (&lcm / x.denom())).collect();
    let mut g = BigInt::zero();
    for x in &ints {
        g = num::integer::gcd(g, x.abs());
    }
    if !g.is_zero() && !g.is_one() {
        for x in &mut ints {
            *x /= &g;
        }
    }
    ints
}

/// Divides an integer vector by the gcd of its entries (in place); sign kept.
pub fn normalize_ints(v: &mut [BigInt]) {
    let mut g = BigInt::zero();
    for x in v.iter() {
        g = num::integer::gcd(g, x.abs());
    }
    if !g.is_zero() && !g.is_one() {
        for x in v.iter_mut() {
            *x /= &g;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_fractions_and_decimals() {
        assert_eq!(parse_ratio("1/3").unwrap(), qfrac(1, 3));
        assert_eq!(parse_ratio(" 2 "). unwrap(), q(2));
        assert_eq!(parse_ratio("0.25").unwrap(), qfrac(1, 4));
        assert_eq!(parse_ratio("-0.5").unwrap(), qfrac(-1, 2));
        assert!(parse_ratio("1/0").is_none());
    }

    #[test]
    fn rationalize_recovers_simple_fractions() {
        assert_eq!(rationalize(0.5, 1 << 20), qfrac(1, 2));
        assert_eq!(rationalize(-2.0 / 3.0, 1 << 20), qfrac(-2, 3));
        assert_eq!(rationalize(0.625, 1 << 20), qfrac(5, 8));
    }

    #[test]
    fn integerize_clears_denominators() {
        let v = vec![qfrac(1, 2), qfrac(-1, 3), q(1)];
        let ints = integerize(&v);
        let expect: Vec<BigInt> = vec![3.into(), (-2).into(), 6.into()];
        assert_eq!(ints, expect);
    }
}
