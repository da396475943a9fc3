//! Scalar abstraction shared by the metric, clustering, tree and oracle code.
//!
//! Distances are generic over [`Scalar`]; `f64` is the workhorse, `f32` is
//! supported for memory-light runs, and [`Exact`] (arbitrary-precision
//! rationals) gives bit-exact behaviour on integral or dyadic instances.
//! Anything that feeds an inequality certificate (weights, cost bounds,
//! lineage products) is lifted into [`Exact`] via [`Scalar::to_exact`].

use std::fmt::{Debug, Display};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, One, ToPrimitive, Zero};

/// Arbitrary-precision rational used for every exact certificate.
pub type Exact = BigRational;

/// Length type of a metric.
pub trait Scalar:
    Num + PartialOrd + Clone + Debug + Display + FromPrimitive + ToPrimitive + Send + Sync + 'static
{
    /// Relative slack allowed when validating metric axioms. Zero for exact types.
    fn tolerance() -> Self;

    /// Lossless conversion into an exact rational.
    fn to_exact(&self) -> Exact;

    fn is_finite_value(&self) -> bool;

    fn lossy_f64(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// `lhs <= rhs * (1 + tolerance)`.
    fn le_with_tolerance(lhs: &Self, rhs: &Self) -> bool {
        let slack = rhs.clone() * Self::tolerance();
        *lhs <= rhs.clone() + slack
    }
}

impl Scalar for f64 {
    fn tolerance() -> Self {
        1e-9
    }

    fn to_exact(&self) -> Exact {
        BigRational::from_float(*self).expect("finite f64 converts exactly")
    }

    fn is_finite_value(&self) -> bool {
        self.is_finite()
    }
}

impl Scalar for f32 {
    // single precision cannot honour 1e-9
    fn tolerance() -> Self {
        1e-6
    }

    fn to_exact(&self) -> Exact {
        BigRational::from_float(*self).expect("finite f32 converts exactly")
    }

    fn is_finite_value(&self) -> bool {
        self.is_finite()
    }
}

impl Scalar for BigRational {
    fn tolerance() -> Self {
        BigRational::zero()
    }

    fn to_exact(&self) -> Exact {
        self.clone()
    }

    fn is_finite_value(&self) -> bool {
        true
    }
}

/// `base^exp` by repeated squaring in any scalar.
pub fn pow_u<S: Scalar>(base: &S, exp: u64) -> S {
    let mut result = S::one();
    let mut b = base.clone();
    let mut e = exp;
    while e > 0 {
        if e & 1 == 1 {
            result = result * b.clone();
        }
        e >>= 1;
        if e > 0 {
            b = b.clone() * b;
        }
    }
    result
}

/// `2 * alpha^exp`, the recurring distance scale.
pub fn two_alpha_pow<S: Scalar>(alpha: &S, exp: u64) -> S {
    (S::one() + S::one()) * pow_u(alpha, exp)
}

pub fn exact_int(v: u64) -> Exact {
    BigRational::from_integer(BigInt::from(v))
}

/// Exact rational from an `f64`; `None` for NaN or infinities.
pub fn exact_from_f64(v: f64) -> Option<Exact> {
    BigRational::from_float(v)
}

/// Floor of an exact non-negative rational, saturating at `u64::MAX`.
pub fn exact_floor_u64(v: &Exact) -> u64 {
    v.floor().to_integer().to_u64().unwrap_or(u64::MAX)
}

pub fn exact_is_one(v: &Exact) -> bool {
    v.is_one()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pow_matches_repeated_multiplication() {
        assert_eq!(pow_u(&6.0f64, 0), 1.0);
        assert_eq!(pow_u(&6.0f64, 3), 216.0);
        assert_eq!(pow_u(&exact_int(6), 145), exact_int(6).pow(145));
        assert_eq!(two_alpha_pow(&6.0f64, 2), 72.0);
    }

    #[test]
    fn float_to_exact_is_lossless() {
        let x = 0.1f64;
        let e = x.to_exact();
        assert_eq!(e.to_f64().unwrap(), x);
        assert_ne!(e, BigRational::new(1.into(), 10.into()));
    }

    #[test]
    fn tolerance_comparisons() {
        assert!(f64::le_with_tolerance(&(100.0 + 1e-8), &100.0));
        assert!(!f64::le_with_tolerance(&100.001, &100.0));
        let a = exact_int(100);
        let b = exact_int(100) + BigRational::new(1.into(), 1_000_000_000_000i64.into());
        assert!(!BigRational::le_with_tolerance(&b, &a));
        assert!(BigRational::le_with_tolerance(&a, &b));
    }
}
