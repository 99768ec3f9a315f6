//! Exact probabilities with power-of-two denominators.

use std::cmp::Ordering;
use std::fmt;
use std::iter::Sum;
use std::ops::Add;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

/// A probability `numerator / 2^log2_denominator` held in canonical form:
/// the numerator is odd, or it is zero and the exponent is zero.
///
/// Canonical form makes derived equality structural, so two values compare
/// equal exactly when they denote the same rational number.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DyadicProb {
    numerator: BigUint,
    log2_denominator: u64,
}

impl DyadicProb {
    pub fn zero() -> Self {
        DyadicProb {
            numerator: BigUint::zero(),
            log2_denominator: 0,
        }
    }

    pub fn one() -> Self {
        DyadicProb {
            numerator: BigUint::one(),
            log2_denominator: 0,
        }
    }

    /// Builds `numerator / 2^log2_denominator`, or `None` if the value exceeds 1.
    pub fn new(numerator: BigUint, log2_denominator: u64) -> Option<Self> {
        let p = Self::from_parts(numerator, log2_denominator);
        (p.numerator.bits() <= p.log2_denominator + 1 && p <= Self::one()).then_some(p)
    }

    /// `numerator / 2^log2_denominator` without the `<= 1` check. Crate-internal:
    /// callers guarantee the bound.
    pub(crate) fn from_parts(numerator: BigUint, log2_denominator: u64) -> Self {
        if numerator.is_zero() {
            return Self::zero();
        }
        let tz = numerator
            .trailing_zeros()
            .unwrap_or(0)
            .min(log2_denominator);
        DyadicProb {
            numerator: numerator >> tz,
            log2_denominator: log2_denominator - tz,
        }
    }

    pub fn numerator(&self) -> &BigUint {
        &self.numerator
    }

    pub fn log2_denominator(&self) -> u64 {
        self.log2_denominator
    }

    pub fn is_zero(&self) -> bool {
        self.numerator.is_zero()
    }

    pub fn half(&self) -> Self {
        if self.is_zero() {
            return Self::zero();
        }
        DyadicProb {
            numerator: self.numerator.clone(),
            log2_denominator: self.log2_denominator + 1,
        }
    }

    /// Numerator of this value written over `2^log2_denominator`.
    ///
    /// Panics if `log2_denominator` is smaller than the canonical exponent.
    pub fn numerator_over(&self, log2_denominator: u64) -> BigUint {
        assert!(
            log2_denominator >= self.log2_denominator,
            "denominator 2^{log2_denominator} too small for {self}"
        );
        &self.numerator << (log2_denominator - self.log2_denominator)
    }

    /// Nearest-ish `f64` (truncated to 64 significant bits before rounding).
    pub fn to_f64(&self) -> f64 {
        let bits = self.numerator.bits();
        let (mantissa, shift) = if bits > 64 {
            let shift = bits - 64;
            (
                (&self.numerator >> shift).to_u64().unwrap_or(u64::MAX),
                shift,
            )
        } else {
            (self.numerator.to_u64().unwrap_or(0), 0)
        };
        scale_pow2(mantissa as f64, shift as i64 - self.log2_denominator as i64)
    }
}

fn scale_pow2(mut value: f64, mut exp: i64) -> f64 {
    while exp < -1000 {
        value *= 2f64.powi(-1000);
        exp += 1000;
        if value == 0.0 {
            return 0.0;
        }
    }
    while exp > 1000 {
        value *= 2f64.powi(1000);
        exp -= 1000;
    }
    value * 2f64.powi(exp as i32)
}

impl Default for DyadicProb {
    fn default() -> Self {
        Self::zero()
    }
}

impl Add<&DyadicProb> for &DyadicProb {
    type Output = DyadicProb;

    fn add(self, rhs: &DyadicProb) -> DyadicProb {
        let d = self.log2_denominator.max(rhs.log2_denominator);
        DyadicProb::from_parts(self.numerator_over(d) + rhs.numerator_over(d), d)
    }
}

impl Add for DyadicProb {
    type Output = DyadicProb;

    fn add(self, rhs: DyadicProb) -> DyadicProb {
        &self + &rhs
    }
}

impl<'a> Sum<&'a DyadicProb> for DyadicProb {
    fn sum<I: Iterator<Item = &'a DyadicProb>>(iter: I) -> Self {
        let items: Vec<&DyadicProb> = iter.collect();
        let d = items.iter().map(|p| p.log2_denominator).max().unwrap_or(0);
        let total = items
            .iter()
            .fold(BigUint::zero(), |acc, p| acc + p.numerator_over(d));
        DyadicProb::from_parts(total, d)
    }
}

impl Sum for DyadicProb {
    fn sum<I: Iterator<Item = DyadicProb>>(iter: I) -> Self {
        let items: Vec<DyadicProb> = iter.collect();
        items.iter().sum()
    }
}

impl PartialOrd for DyadicProb {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for DyadicProb {
    fn cmp(&self, other: &Self) -> Ordering {
        let d = self.log2_denominator.max(other.log2_denominator);
        self.numerator_over(d).cmp(&other.numerator_over(d))
    }
}

impl fmt::Display for DyadicProb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.log2_denominator == 0 {
            write!(f, "{}", self.numerator)
        } else {
            write!(f, "{}/2^{}", self.numerator, self.log2_denominator)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(num: u64, d: u64) -> DyadicProb {
        DyadicProb::new(BigUint::from(num), d).unwrap()
    }

    #[test]
    fn canonical_form_is_reduced() {
        let a = p(4, 3);
        assert_eq!(a.numerator(), &BigUint::from(1u32));
        assert_eq!(a.log2_denominator(), 1);
        assert_eq!(a, p(1, 1));
        assert_eq!(p(0, 7), DyadicProb::zero());
        assert_eq!(p(8, 3), DyadicProb::one());
    }

    #[test]
    fn rejects_values_above_one() {
        assert!(DyadicProb::new(BigUint::from(3u32), 1).is_none());
        assert!(DyadicProb::new(BigUint::from(9u32), 3).is_none());
    }

    #[test]
    fn halves_and_sums() {
        let quarter = p(1, 1).half();
        assert_eq!(quarter, p(1, 2));
        assert_eq!(&quarter + &quarter, p(1, 1));
        let total: DyadicProb = [p(1, 1), p(1, 2), p(1, 2)].iter().sum();
        assert_eq!(total, DyadicProb::one());
    }

    #[test]
    fn float_conversion_handles_huge_exponents() {
        assert_eq!(p(3, 2).to_f64(), 0.75);
        let tiny = DyadicProb::from_parts(BigUint::one(), 5000);
        assert_eq!(tiny.to_f64(), 0.0);
        let big_num = (BigUint::one() << 3000u32) - BigUint::one();
        let nearly_one = DyadicProb::from_parts(big_num, 3000);
        assert!((nearly_one.to_f64() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn display() {
        assert_eq!(p(3, 4).to_string(), "3/2^4");
        assert_eq!(DyadicProb::one().to_string(), "1");
    }

    proptest! {
        #[test]
        fn addition_is_exact_and_commutative(a in 0u64..1 << 20, da in 20u64..40, b in 0u64..1 << 20, db in 20u64..40) {
            let x = p(a, da);
            let y = p(b, db);
            let s = &x + &y;
            prop_assert_eq!(&s, &(&y + &x));
            let exact = a as f64 / 2f64.powi(da as i32) + b as f64 / 2f64.powi(db as i32);
            prop_assert_eq!(s.to_f64(), exact);
            prop_assert!(s.numerator().is_zero() || s.numerator().bit(0));
        }
    }
}
