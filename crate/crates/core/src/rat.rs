//! Exact rational scalars used during problem assembly.
//!
//! All expression coefficients stay rational until they reach the solver,
//! so assembled constraint matrices can be compared entry-for-entry.

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{FromPrimitive, Signed, ToPrimitive, Zero};

pub type Rat = BigRational;

/// Rational from an integer.
pub fn rint(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

/// Rational p/q.
pub fn ratio(p: i64, q: i64) -> Rat {
    assert!(q != 0, "zero denominator");
    Rat::new(BigInt::from(p), BigInt::from(q))
}

pub fn to_f64(r: &Rat) -> f64 {
    r.to_f64().expect("rational out of f64 range")
}

/// Parse a decimal literal ("0.1", "-3", "2.5e-3", "81/121") into an exact rational.
pub fn parse_decimal(s: &str) -> Option<Rat> {
    let s = s.trim();
    if let Some((p, q)) = s.split_once('/') {
        let p: BigInt = p.trim().parse().ok()?;
        let q: BigInt = q.trim().parse().ok()?;
        if q.is_zero() {
            return None;
        }
        return Some(Rat::new(p, q));
    }
    let (mantissa, exp) = match s.split_once(['e', 'E']) {
        Some((m, e)) => (m, e.parse::<i32>().ok()?),
        None => (s, 0),
    };
    let (int_part, frac_part) = match mantissa.split_once('.') {
        Some((i, f)) => (i, f),
        None => (mantissa, ""),
    };
    let digits = format!("{}{}", int_part, frac_part);
    if digits.is_empty() || digits == "-" || digits == "+" {
        return None;
    }
    let value: BigInt = digits.parse().ok()?;
    let scale = exp - frac_part.len() as i32;
    let ten = BigInt::from(10);
    Some(if scale >= 0 {
        Rat::from_integer(value * num::pow::pow(ten, scale as usize))
    } else {
        Rat::new(value, num::pow::pow(ten, (-scale) as usize))
    })
}

/// Best small-height rational approximation of `x` by continued fractions.
///
/// Returns the first convergent with denominator at most `max_den` that is
/// within `tol` of `x`, or `None` when no such convergent exists.
pub fn rationalize(x: f64, max_den: u64, tol: f64) -> Option<Rat> {
    if !x.is_finite() {
        return None;
    }
    let target = Rat::from_f64(x)?;
    let mut rem = target.clone();
    // convergents p/q
    let (mut p0, mut q0) = (BigInt::from(1), BigInt::from(0));
    let (mut p1, mut q1) = (rem.floor().to_integer(), BigInt::from(1));
    rem -= Rat::from_integer(p1.clone());
    for _ in 0..64 {
        let cand = Rat::new(p1.clone(), q1.clone());
        if q1 > BigInt::from(max_den) {
            return None;
        }
        if (cand.clone() - &target).abs().to_f64().unwrap_or(f64::MAX) <= tol {
            return Some(cand);
        }
        if rem.is_zero() {
            return None;
        }
        rem = rem.recip();
        let a = rem.floor().to_integer();
        rem -= Rat::from_integer(a.clone());
        let p2 = &a * &p1 + &p0;
        let q2 = &a * &q1 + &q0;
        p0 = p1;
        q0 = q1;
        p1 = p2;
        q1 = q2;
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimal_parsing_is_exact() {
        assert_eq!(parse_decimal("0.1").unwrap(), ratio(1, 10));
        assert_eq!(parse_decimal("-2.5e-3").unwrap(), ratio(-1, 400));
        assert_eq!(parse_decimal("10").unwrap(), rint(10));
        assert_eq!(parse_decimal("81/121").unwrap(), ratio(81, 121));
        assert!(parse_decimal("1/0").is_none());
    }

    #[test]
    fn rationalize_recovers_small_fractions() {
        let x = 81.0 / 121.0 + 3e-10;
        assert_eq!(rationalize(x, 10_000, 1e-7).unwrap(), ratio(81, 121));
        assert_eq!(rationalize(0.2 / 1.1, 10_000, 1e-7).unwrap(), ratio(2, 11));
        // pi has no small-denominator convergent at this tolerance
        assert!(rationalize(std::f64::consts::PI, 100, 1e-12).is_none());
    }
}
