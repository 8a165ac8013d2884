//! Extended-precision real arithmetic.
//!
//! Partial-fraction coefficients of high-multiplicity pole systems alternate
//! in sign with magnitudes far beyond 1e100, so the distribution evaluators
//! accumulate in software floats of configurable precision (512 bits by
//! default) instead of f64. `Real` wraps [`astro_float::BigFloat`] with an
//! explicit per-value precision and round-to-even everywhere.

use std::cell::RefCell;
use std::cmp::Ordering;
use std::fmt;

use astro_float::{BigFloat, Consts, RoundingMode, Sign};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Signed;

/// Default mantissa precision in bits for coefficient storage and
/// accumulation.
pub const DEFAULT_PRECISION_BITS: usize = 512;

const RM: RoundingMode = RoundingMode::ToEven;

thread_local! {
    // Cache of constants (pi, ln2, ...) used by transcendental functions.
    static CONSTS: RefCell<Consts> = RefCell::new(Consts::new().expect("constants cache"));
}

/// Arbitrary-precision binary float with a fixed working precision.
#[derive(Clone)]
pub struct Real {
    v: BigFloat,
    prec: usize,
}

impl Real {
    pub fn zero(prec: usize) -> Self {
        Real { v: BigFloat::from_f64(0.0, prec), prec }
    }

    pub fn one(prec: usize) -> Self {
        Real { v: BigFloat::from_f64(1.0, prec), prec }
    }

    pub fn from_f64(x: f64, prec: usize) -> Self {
        Real { v: BigFloat::from_f64(x, prec), prec }
    }

    pub fn from_u64(x: u64, prec: usize) -> Self {
        Real { v: BigFloat::from_u64(x, prec), prec }
    }

    pub fn from_i64(x: i64, prec: usize) -> Self {
        Real { v: BigFloat::from_i64(x, prec), prec }
    }

    /// Exact-then-rounded conversion of a big integer.
    ///
    /// Only the top `prec + 64` bits participate; the rest are truncated
    /// before the final rounding, keeping the cost independent of the
    /// integer size.
    pub fn from_bigint(x: &BigInt, prec: usize) -> Self {
        let sign = if x.is_negative() { Sign::Neg } else { Sign::Pos };
        let mag = x.magnitude();
        let bits = mag.bits();
        if bits == 0 {
            return Real::zero(prec);
        }
        let keep = (prec + 64) as u64;
        let (words, shift) = if bits > keep {
            let shift = bits - keep;
            ((mag >> shift).to_u64_digits(), shift as i64)
        } else {
            (mag.to_u64_digits(), 0)
        };
        // from_words treats the input as 0.m * 2^e with m occupying
        // len*64 bits, so an integer needs e = len*64 (+ dropped bits).
        let e = (words.len() as i64) * 64 + shift;
        let mut v = BigFloat::from_words(&words, sign, e as astro_float::Exponent);
        if v.set_precision(prec, RM).is_err() {
            v = BigFloat::nan(None);
        }
        Real { v, prec }
    }

    /// Correctly rounded conversion of an exact rational.
    pub fn from_rational(x: &BigRational, prec: usize) -> Self {
        // Guard digits so numerator/denominator rounding cannot affect the
        // final quotient rounding.
        let wide = prec + 64;
        let n = Real::from_bigint(x.numer(), wide);
        let d = Real::from_bigint(x.denom(), wide);
        let mut v = n.v.div(&d.v, wide, RM);
        if v.set_precision(prec, RM).is_err() {
            v = BigFloat::nan(None);
        }
        Real { v, prec }
    }

    pub fn prec(&self) -> usize {
        self.prec
    }

    pub fn is_nan(&self) -> bool {
        self.v.is_nan()
    }

    pub fn is_zero(&self) -> bool {
        self.v.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.v.is_negative() && !self.v.is_zero()
    }

    pub fn is_positive(&self) -> bool {
        self.v.is_positive() && !self.v.is_zero()
    }

    /// Binary exponent: `|self|` lies in `[2^(e-1), 2^e)`. Zero reports
    /// `i64::MIN`, which makes it absorbing for magnitude maxima.
    pub fn exponent(&self) -> i64 {
        if self.v.is_zero() || self.v.is_nan() {
            i64::MIN
        } else {
            self.v.exponent().map_or(i64::MIN, |e| e as i64)
        }
    }

    /// Truncating conversion to f64 (error below one f64 ulp).
    pub fn to_f64(&self) -> f64 {
        if self.v.is_nan() {
            return f64::NAN;
        }
        if self.v.is_zero() {
            return 0.0;
        }
        if self.v.is_inf_pos() {
            return f64::INFINITY;
        }
        if self.v.is_inf_neg() {
            return f64::NEG_INFINITY;
        }
        let (words, _n, sign, e, _) = self.v.as_raw_parts().expect("finite value");
        let top = *words.last().expect("nonzero mantissa");
        // value = 0.m * 2^e; the top word carries the leading 64 bits.
        let mag = top as f64 * 2f64.powi(e - 64);
        if sign == Sign::Neg {
            -mag
        } else {
            mag
        }
    }

    pub fn abs(&self) -> Self {
        let mut v = self.v.clone();
        v.set_sign(Sign::Pos);
        Real { v, prec: self.prec }
    }

    pub fn neg(&self) -> Self {
        Real { v: self.v.neg(), prec: self.prec }
    }

    pub fn add(&self, rhs: &Real) -> Self {
        let p = self.prec.max(rhs.prec);
        Real { v: self.v.add(&rhs.v, p, RM), prec: p }
    }

    pub fn sub(&self, rhs: &Real) -> Self {
        let p = self.prec.max(rhs.prec);
        Real { v: self.v.sub(&rhs.v, p, RM), prec: p }
    }

    pub fn mul(&self, rhs: &Real) -> Self {
        let p = self.prec.max(rhs.prec);
        Real { v: self.v.mul(&rhs.v, p, RM), prec: p }
    }

    pub fn div(&self, rhs: &Real) -> Self {
        let p = self.prec.max(rhs.prec);
        Real { v: self.v.div(&rhs.v, p, RM), prec: p }
    }

    pub fn recip(&self) -> Self {
        Real { v: self.v.reciprocal(self.prec, RM), prec: self.prec }
    }

    pub fn sqrt(&self) -> Self {
        Real { v: self.v.sqrt(self.prec, RM), prec: self.prec }
    }

    pub fn exp(&self) -> Self {
        let v = CONSTS.with(|cc| self.v.exp(self.prec, RM, &mut cc.borrow_mut()));
        Real { v, prec: self.prec }
    }

    pub fn ln(&self) -> Self {
        let v = CONSTS.with(|cc| self.v.ln(self.prec, RM, &mut cc.borrow_mut()));
        Real { v, prec: self.prec }
    }

    /// Integer power with exact exponent handling (negative allowed).
    pub fn powi(&self, n: i64) -> Self {
        if n == 0 {
            return Real::one(self.prec);
        }
        let p = self.prec;
        let v = self.v.powi(n.unsigned_abs() as usize, p, RM);
        let v = if n < 0 { v.reciprocal(p, RM) } else { v };
        Real { v, prec: p }
    }

    pub fn pi(prec: usize) -> Self {
        let v = CONSTS.with(|cc| cc.borrow_mut().pi(prec, RM));
        Real { v, prec }
    }

    /// Maximum of two magnitudes, by absolute value.
    pub fn max_abs(&self, rhs: &Real) -> Self {
        if self.abs_cmp(rhs) == Ordering::Less {
            rhs.abs()
        } else {
            self.abs()
        }
    }

    pub fn abs_cmp(&self, rhs: &Real) -> Ordering {
        match self.v.abs_cmp(&rhs.v) {
            Some(c) => c.cmp(&0),
            None => Ordering::Equal,
        }
    }
}

impl PartialEq for Real {
    fn eq(&self, other: &Self) -> bool {
        matches!(self.v.cmp(&other.v), Some(0))
    }
}

impl PartialOrd for Real {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.v.cmp(&other.v).map(|c| c.cmp(&0))
    }
}

impl fmt::Display for Real {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.v)
    }
}

impl fmt::Debug for Real {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Real({} @{})", self.v, self.prec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;
    use num_traits::One;

    #[test]
    fn integer_conversion_round_trips() {
        let x = BigInt::from(123_456_789_u64);
        let r = Real::from_bigint(&x, 128);
        assert_eq!(r.to_f64(), 123_456_789.0);

        let neg = BigInt::from(-42);
        assert_eq!(Real::from_bigint(&neg, 64).to_f64(), -42.0);

        // 2^200 + 1 truncates in f64 but must keep the right scale.
        let big = (BigInt::one() << 200) + 1;
        let r = Real::from_bigint(&big, 256);
        assert!((r.to_f64() - 2f64.powi(200)).abs() <= 2f64.powi(200 - 52));
    }

    #[test]
    fn rational_conversion_matches_division() {
        let third = BigRational::new(BigInt::from(1), BigInt::from(3));
        let r = Real::from_rational(&third, 256);
        let direct = Real::one(256).div(&Real::from_f64(3.0, 256));
        assert!(r.sub(&direct).abs().to_f64() < 1e-70);
        assert!((r.to_f64() - 1.0 / 3.0).abs() < 1e-16);
    }

    #[test]
    fn transcendentals_hit_known_values() {
        let p = 256;
        let e = Real::one(p).exp();
        assert!((e.to_f64() - std::f64::consts::E).abs() < 1e-15);
        let ln2 = Real::from_f64(2.0, p).ln();
        assert!((ln2.to_f64() - std::f64::consts::LN_2).abs() < 1e-15);
        let s = Real::from_f64(2.0, p).sqrt();
        assert!((s.to_f64() - std::f64::consts::SQRT_2).abs() < 1e-15);
        assert!((Real::pi(p).to_f64() - std::f64::consts::PI).abs() < 1e-15);
    }

    #[test]
    fn powi_handles_negative_exponents() {
        let p = 128;
        let x = Real::from_f64(2.0, p);
        assert_eq!(x.powi(10).to_f64(), 1024.0);
        assert_eq!(x.powi(-3).to_f64(), 0.125);
        assert_eq!(x.powi(0).to_f64(), 1.0);
    }

    #[test]
    fn exponent_tracks_magnitude() {
        let p = 128;
        assert_eq!(Real::from_f64(1.0, p).exponent(), 1);
        assert_eq!(Real::from_f64(0.75, p).exponent(), 0);
        assert_eq!(Real::zero(p).exponent(), i64::MIN);
        let huge = Real::from_f64(2.0, p).powi(1000);
        assert_eq!(huge.exponent(), 1001);
    }
}
