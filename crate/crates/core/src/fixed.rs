//! Exact fixed-point numbers for the fractional LP.
//!
//! Values are non-negative multiples of 2^-64 stored in a `u128`. Additions,
//! doublings and comparisons against small rationals are exact; the only
//! rounding in the LP pipeline is the floor taken when computing the initial
//! per-vertex share, and rounding down never breaks feasibility.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Sub, SubAssign};

use num_rational::Ratio;
use serde::{Serialize, Serializer};

pub const FRAC_BITS: u32 = 64;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Fixed(u128);

impl Fixed {
    pub const ZERO: Fixed = Fixed(0);
    pub const ONE: Fixed = Fixed(1 << FRAC_BITS);

    #[inline]
    pub const fn from_raw(raw: u128) -> Self {
        Fixed(raw)
    }

    #[inline]
    pub const fn raw(self) -> u128 {
        self.0
    }

    #[inline]
    pub const fn from_int(v: u64) -> Self {
        Fixed((v as u128) << FRAC_BITS)
    }

    /// `floor(num / den)` in fixed point.
    pub fn from_ratio_floor(num: u128, den: u128) -> Self {
        assert!(den > 0, "zero denominator");
        let whole = num / den;
        let rem = num % den;
        Fixed((whole << FRAC_BITS) + (rem << FRAC_BITS) / den)
    }

    /// `ceil(num / den)` in fixed point.
    pub fn from_ratio_ceil(num: u128, den: u128) -> Self {
        let f = Self::from_ratio_floor(num, den);
        if f.mul_int(den) < Fixed::from_raw(num << FRAC_BITS) {
            Fixed(f.0 + 1)
        } else {
            f
        }
    }

    /// Nearest-below fixed-point value of a decimal rational.
    pub fn from_ratio_u64(r: Ratio<u64>) -> Self {
        Self::from_ratio_floor(*r.numer() as u128, *r.denom() as u128)
    }

    #[inline]
    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    #[inline]
    pub fn double(self) -> Self {
        Fixed(self.0.checked_mul(2).expect("fixed-point overflow"))
    }

    #[inline]
    pub fn half_floor(self) -> Self {
        Fixed(self.0 >> 1)
    }

    #[inline]
    pub fn mul_int(self, k: u128) -> Self {
        Fixed(self.0.checked_mul(k).expect("fixed-point overflow"))
    }

    #[inline]
    pub fn shl(self, bits: u32) -> Self {
        Fixed(
            self.0
                .checked_shl(bits)
                .filter(|v| v >> bits == self.0)
                .expect("fixed-point overflow"),
        )
    }

    /// `floor(self * num / den)`.
    pub fn mul_ratio_floor(self, num: u128, den: u128) -> Self {
        let prod = self.0.checked_mul(num).expect("fixed-point overflow");
        Fixed(prod / den)
    }

    /// `self + floor(span * k / 2^64)`: a point on the 2^-64 grid between
    /// `self` and `self + span`.
    pub fn lerp_grid(self, span: Fixed, k: u64) -> Self {
        let hi = span.0 >> 64;
        let lo = span.0 & u64::MAX as u128;
        let offset = hi * k as u128 + ((lo * k as u128) >> 64);
        Fixed(self.0 + offset)
    }

    #[inline]
    pub fn saturating_sub(self, other: Fixed) -> Fixed {
        Fixed(self.0.saturating_sub(other.0))
    }

    /// Exact test of `self * den < other * num`.
    #[inline]
    pub fn lt_scaled(self, den: u128, other: Fixed, num: u128) -> bool {
        mul_wide(self.0, den) < mul_wide(other.0, num)
    }

    /// Exact test of `self * den >= other * num`.
    #[inline]
    pub fn ge_scaled(self, den: u128, other: Fixed, num: u128) -> bool {
        !self.lt_scaled(den, other, num)
    }

    pub fn to_f64(self) -> f64 {
        (self.0 >> 64) as f64 + (self.0 as u64) as f64 / 18_446_744_073_709_551_616.0
    }

    pub fn min(self, other: Fixed) -> Fixed {
        if self <= other {
            self
        } else {
            other
        }
    }
}

/// 256-bit product as (high, low) limbs; only used for exact comparisons.
#[inline]
fn mul_wide(a: u128, b: u128) -> (u128, u128) {
    let mask = u64::MAX as u128;
    let (a1, a0) = (a >> 64, a & mask);
    let (b1, b0) = (b >> 64, b & mask);
    let p00 = a0 * b0;
    let p01 = a0 * b1;
    let p10 = a1 * b0;
    let p11 = a1 * b1;
    let mid = (p00 >> 64) + (p01 & mask) + (p10 & mask);
    let lo = (p00 & mask) | (mid << 64);
    let hi = p11 + (p01 >> 64) + (p10 >> 64) + (mid >> 64);
    (hi, lo)
}

impl Add for Fixed {
    type Output = Fixed;
    #[inline]
    fn add(self, rhs: Fixed) -> Fixed {
        Fixed(self.0.checked_add(rhs.0).expect("fixed-point overflow"))
    }
}

impl AddAssign for Fixed {
    #[inline]
    fn add_assign(&mut self, rhs: Fixed) {
        *self = *self + rhs;
    }
}

impl Sub for Fixed {
    type Output = Fixed;
    #[inline]
    fn sub(self, rhs: Fixed) -> Fixed {
        Fixed(self.0.checked_sub(rhs.0).expect("fixed-point underflow"))
    }
}

impl SubAssign for Fixed {
    #[inline]
    fn sub_assign(&mut self, rhs: Fixed) {
        *self = *self - rhs;
    }
}

impl Sum for Fixed {
    fn sum<I: Iterator<Item = Fixed>>(iter: I) -> Fixed {
        iter.fold(Fixed::ZERO, |a, b| a + b)
    }
}

impl<'a> Sum<&'a Fixed> for Fixed {
    fn sum<I: Iterator<Item = &'a Fixed>>(iter: I) -> Fixed {
        iter.fold(Fixed::ZERO, |a, b| a + *b)
    }
}

impl fmt::Display for Fixed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_f64())
    }
}

impl Serialize for Fixed {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.to_f64())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ratio_rounding() {
        let third = Fixed::from_ratio_floor(1, 3);
        assert!(third.mul_int(3) < Fixed::ONE);
        let third_up = Fixed::from_ratio_ceil(1, 3);
        assert!(third_up.mul_int(3) > Fixed::ONE);
        assert_eq!(Fixed::from_ratio_floor(6, 3), Fixed::from_int(2));
        assert_eq!(Fixed::from_ratio_ceil(6, 3), Fixed::from_int(2));
    }

    #[test]
    fn scaled_comparison_is_exact() {
        // 0.2 * 5 == 1 exactly in the scaled form.
        let one = Fixed::ONE;
        assert!(!one.lt_scaled(5, Fixed::from_int(5), 1));
        assert!(one.ge_scaled(5, Fixed::from_int(5), 1));
        let below = Fixed::from_raw(Fixed::ONE.raw() - 1);
        assert!(below.lt_scaled(5, Fixed::from_int(5), 1));
    }

    #[test]
    fn lerp_grid_endpoints() {
        let lo = Fixed::from_int(2);
        let span = Fixed::from_int(3);
        assert_eq!(lo.lerp_grid(span, 0), lo);
        assert!(lo.lerp_grid(span, u64::MAX) < lo + span);
        assert_eq!(lo.lerp_grid(span, 1 << 63), Fixed::from_ratio_floor(7, 2));
    }

    proptest! {
        #[test]
        fn wide_mul_matches_u128_when_small(a in 0u128..(1u128 << 63), b in 0u128..(1u128 << 63)) {
            let (hi, lo) = mul_wide(a, b);
            prop_assert_eq!(hi, 0);
            prop_assert_eq!(lo, a * b);
        }

        #[test]
        fn wide_mul_is_commutative(a in any::<u128>(), b in any::<u128>()) {
            prop_assert_eq!(mul_wide(a, b), mul_wide(b, a));
        }
    }
}
