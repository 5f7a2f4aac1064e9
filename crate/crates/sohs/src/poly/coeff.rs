use num::bigint::BigInt;
use num::rational::BigRational;
use num::ToPrimitive;
use std::fmt::{Debug, Display};
use std::ops::{Add, Mul, Neg, Sub};

/// Arbitrary-precision rational number, the exact coefficient type.
pub type Rat = BigRational;

/// Coefficient ring shared by the exact and the floating-point paths.
///
/// The polynomial types are generic over this trait so that the exact
/// rational implementation and the f64 implementation are literally the
/// same code. `is_zero` decides whether a term is dropped from canonical
/// form; for f64 only an exact 0.0 is dropped, tiny values are kept.
pub trait Coeff:
    Clone
    + PartialEq
    + Debug
    + Display
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
{
    fn zero() -> Self;
    fn one() -> Self;
    fn is_zero(&self) -> bool;
    fn from_rat(r: &Rat) -> Self;
    fn to_f64(&self) -> f64;
}

impl Coeff for Rat {
    fn zero() -> Self {
        num::Zero::zero()
    }
    fn one() -> Self {
        num::One::one()
    }
    fn is_zero(&self) -> bool {
        num::Zero::is_zero(self)
    }
    fn from_rat(r: &Rat) -> Self {
        r.clone()
    }
    fn to_f64(&self) -> f64 {
        rat_to_f64(self)
    }
}

impl Coeff for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
    fn from_rat(r: &Rat) -> Self {
        rat_to_f64(r)
    }
    fn to_f64(&self) -> f64 {
        *self
    }
}

/// Rational from small integers, handy in tests and constructions.
pub(crate) fn rat(num: i64, den: i64) -> Rat {
    Rat::new(BigInt::from(num), BigInt::from(den))
}

pub(crate) fn rat_int(num: i64) -> Rat {
    Rat::from(BigInt::from(num))
}

/// Best-effort conversion; very large numerators overflow to +/-inf.
pub(crate) fn rat_to_f64(r: &Rat) -> f64 {
    ToPrimitive::to_f64(r).unwrap_or_else(|| {
        let num = ToPrimitive::to_f64(r.numer()).unwrap_or(f64::INFINITY);
        let den = ToPrimitive::to_f64(r.denom()).unwrap_or(f64::INFINITY);
        num / den
    })
}

/// Exact conversion: every finite f64 is a rational with a power-of-two
/// denominator. Panics on NaN or infinity.
pub(crate) fn f64_to_rat_exact(x: f64) -> Rat {
    assert!(x.is_finite(), "cannot convert non-finite float {x} to rational");
    Rat::from_float(x).expect("finite float converts exactly")
}

/// Nearest rational with denominator at most `max_den`, by the continued
/// fraction expansion of `x`. Used when rounding numeric certificates to
/// exact ones: small denominators keep later exact arithmetic cheap.
pub(crate) fn round_f64_to_rat(x: f64, max_den: u64) -> Rat {
    assert!(x.is_finite());
    let negative = x < 0.0;
    let ax = x.abs();
    // Convergents p/q of the continued fraction of ax.
    let (mut p0, mut q0) = (BigInt::from(1), BigInt::from(0));
    let (mut p1, mut q1) = (BigInt::from(ax.floor() as i64), BigInt::from(1));
    let mut frac = ax - ax.floor();
    let bound = BigInt::from(max_den);
    for _ in 0..64 {
        if frac.abs() < 1e-18 {
            break;
        }
        let inv = 1.0 / frac;
        if !inv.is_finite() || inv >= 9e18 {
            break;
        }
        let a = BigInt::from(inv.floor() as i64);
        frac = inv - inv.floor();
        let p2 = &a * &p1 + &p0;
        let q2 = &a * &q1 + &q0;
        if q2 > bound {
            break;
        }
        p0 = p1;
        q0 = q1;
        p1 = p2;
        q1 = q2;
    }
    let mut r = Rat::new(p1, q1);
    if negative {
        r = -r;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_float_conversion_round_trips() {
        for &x in &[0.0, 1.5, -0.1, 3.141592653589793, 1e-17, -123456.75] {
            assert_eq!(rat_to_f64(&f64_to_rat_exact(x)), x);
        }
    }

    #[test]
    fn continued_fraction_rounding_recovers_simple_fractions() {
        assert_eq!(round_f64_to_rat(0.5, 100), rat(1, 2));
        assert_eq!(round_f64_to_rat(-2.0 / 3.0, 100), rat(-2, 3));
        assert_eq!(round_f64_to_rat(0.333333333333333, 10), rat(1, 3));
        // Tiny noise rounds to zero when the denominator budget is small.
        assert_eq!(round_f64_to_rat(3e-13, 1_000_000), rat(0, 1));
    }

    #[test]
    fn rounding_respects_denominator_bound() {
        let r = round_f64_to_rat(std::f64::consts::PI, 1000);
        assert!(r.denom() <= &BigInt::from(1000u64));
        assert!((rat_to_f64(&r) - std::f64::consts::PI).abs() < 1e-5);
    }
}
