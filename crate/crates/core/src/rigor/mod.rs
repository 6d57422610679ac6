//! Interval arithmetic with per-operation directed rounding.
//!
//! Every operation computes the round-to-nearest result and then uses an
//! error-free transform to decide whether the exact result lies below or
//! above it. No floating-point environment state is touched.

mod decimal;
mod norms;
mod trig;

pub use decimal::{format_lower, format_upper, parse_enclosure, DecimalInterval};
pub use norms::{
    conv_bv, conv_l1, conv_l1_zero_mass, conv_w, convolution_norm_bounds, NormBadge, NormKind,
    NormSet,
};
pub use trig::{cos_point, sin_point};

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

/// Below this magnitude the fma residual can itself be inexact, so the
/// rounding helpers widen unconditionally.
const TINY: f64 = 1e-290;

#[inline]
fn two_sum_err(a: f64, b: f64, s: f64) -> f64 {
    let bb = s - a;
    (a - (s - bb)) + (b - bb)
}

#[inline]
pub fn add_down(a: f64, b: f64) -> f64 {
    let s = a + b;
    if s.is_infinite() {
        return if s > 0.0 && a.is_finite() && b.is_finite() { f64::MAX } else { s };
    }
    if two_sum_err(a, b, s) < 0.0 {
        s.next_down()
    } else {
        s
    }
}

#[inline]
pub fn add_up(a: f64, b: f64) -> f64 {
    let s = a + b;
    if s.is_infinite() {
        return if s < 0.0 && a.is_finite() && b.is_finite() { -f64::MAX } else { s };
    }
    if two_sum_err(a, b, s) > 0.0 {
        s.next_up()
    } else {
        s
    }
}

#[inline]
pub fn sub_down(a: f64, b: f64) -> f64 {
    add_down(a, -b)
}

#[inline]
pub fn sub_up(a: f64, b: f64) -> f64 {
    add_up(a, -b)
}

#[inline]
pub fn mul_down(a: f64, b: f64) -> f64 {
    let p = a * b;
    if p.is_infinite() {
        return if p > 0.0 && a.is_finite() && b.is_finite() { f64::MAX } else { p };
    }
    if a == 0.0 || b == 0.0 {
        return 0.0;
    }
    if p.abs() < TINY {
        return p.next_down();
    }
    if a.mul_add(b, -p) < 0.0 {
        p.next_down()
    } else {
        p
    }
}

#[inline]
pub fn mul_up(a: f64, b: f64) -> f64 {
    let p = a * b;
    if p.is_infinite() {
        return if p < 0.0 && a.is_finite() && b.is_finite() { -f64::MAX } else { p };
    }
    if a == 0.0 || b == 0.0 {
        return 0.0;
    }
    if p.abs() < TINY {
        return p.next_up();
    }
    if a.mul_add(b, -p) > 0.0 {
        p.next_up()
    } else {
        p
    }
}

#[inline]
pub fn div_down(a: f64, b: f64) -> f64 {
    let q = a / b;
    if q.is_infinite() {
        return if q > 0.0 { f64::MAX } else { q };
    }
    if a == 0.0 {
        return 0.0;
    }
    if q.abs() < TINY || a.abs() < TINY {
        return q.next_down();
    }
    // a - q*b is exact; its sign relative to b gives the direction of the error.
    let r = (-q).mul_add(b, a);
    if (r < 0.0) != (b < 0.0) && r != 0.0 {
        // exact quotient below q
        q.next_down()
    } else {
        q
    }
}

#[inline]
pub fn div_up(a: f64, b: f64) -> f64 {
    let q = a / b;
    if q.is_infinite() {
        return if q < 0.0 { -f64::MAX } else { q };
    }
    if a == 0.0 {
        return 0.0;
    }
    if q.abs() < TINY || a.abs() < TINY {
        return q.next_up();
    }
    let r = (-q).mul_add(b, a);
    if (r > 0.0) == (b > 0.0) && r != 0.0 {
        q.next_up()
    } else {
        q
    }
}

#[inline]
pub fn sqrt_down(a: f64) -> f64 {
    let r = a.sqrt();
    if r == 0.0 {
        return 0.0;
    }
    if (-r).mul_add(r, a) < 0.0 {
        r.next_down()
    } else {
        r
    }
}

#[inline]
pub fn sqrt_up(a: f64) -> f64 {
    let r = a.sqrt();
    if r == 0.0 {
        return 0.0;
    }
    if (-r).mul_add(r, a) > 0.0 {
        r.next_up()
    } else {
        r
    }
}

/// A closed interval `[lo, hi]` of reals.
#[derive(Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IVal {
    lo: f64,
    hi: f64,
}

impl fmt::Debug for IVal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{:e}, {:e}]", self.lo, self.hi)
    }
}

impl fmt::Display for IVal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let digits = f.precision().unwrap_or(17);
        write!(f, "[{}, {}]", format_lower(self.lo, digits), format_upper(self.hi, digits))
    }
}

impl IVal {
    pub const ZERO: IVal = IVal { lo: 0.0, hi: 0.0 };
    pub const ONE: IVal = IVal { lo: 1.0, hi: 1.0 };
    /// Enclosure of pi.
    pub const PI: IVal = IVal { lo: std::f64::consts::PI, hi: 3.1415926535897936 };
    /// Enclosure of 2 pi.
    pub const TWO_PI: IVal = IVal { lo: 2.0 * std::f64::consts::PI, hi: 2.0 * 3.1415926535897936 };
    /// Enclosure of pi / 2.
    pub const HALF_PI: IVal = IVal { lo: std::f64::consts::FRAC_PI_2, hi: 1.5707963267948968 };

    /// Interval from bounds. Panics if `lo > hi` or either bound is NaN.
    #[inline]
    pub fn new(lo: f64, hi: f64) -> IVal {
        assert!(lo <= hi, "invalid interval [{lo}, {hi}]");
        IVal { lo, hi }
    }

    /// Interval from bounds, reporting an error instead of panicking.
    pub fn try_new(lo: f64, hi: f64) -> Result<IVal> {
        if lo <= hi {
            Ok(IVal { lo, hi })
        } else {
            Err(Error::InvalidParams(format!("invalid interval [{lo}, {hi}]")))
        }
    }

    #[inline]
    pub const fn point(x: f64) -> IVal {
        IVal { lo: x, hi: x }
    }

    /// Smallest interval containing both bounds, in any order.
    #[inline]
    pub fn hull_of(a: f64, b: f64) -> IVal {
        IVal { lo: a.min(b), hi: a.max(b) }
    }

    /// Enclosure of the rational `p / q`.
    pub fn ratio(p: f64, q: f64) -> IVal {
        IVal { lo: div_down(p, q), hi: div_up(p, q) }
    }

    #[inline]
    pub fn lo(self) -> f64 {
        self.lo
    }

    #[inline]
    pub fn hi(self) -> f64 {
        self.hi
    }

    #[inline]
    pub fn mid(self) -> f64 {
        if self.lo == self.hi {
            self.lo
        } else {
            0.5 * self.lo + 0.5 * self.hi
        }
    }

    /// Upper bound on the width.
    #[inline]
    pub fn width(self) -> f64 {
        sub_up(self.hi, self.lo)
    }

    /// Upper bound on the radius about `mid()`.
    pub fn rad(self) -> f64 {
        let m = self.mid();
        sub_up(self.hi, m).max(sub_up(m, self.lo))
    }

    /// Upper bound on `|x|` over the interval.
    #[inline]
    pub fn mag(self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }

    /// Lower bound on `|x|` over the interval.
    #[inline]
    pub fn mig(self) -> f64 {
        if self.lo > 0.0 {
            self.lo
        } else if self.hi < 0.0 {
            -self.hi
        } else {
            0.0
        }
    }

    #[inline]
    pub fn contains(self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    #[inline]
    pub fn contains_zero(self) -> bool {
        self.contains(0.0)
    }

    #[inline]
    pub fn subset_of(self, other: IVal) -> bool {
        other.lo <= self.lo && self.hi <= other.hi
    }

    #[inline]
    pub fn overlaps(self, other: IVal) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }

    #[inline]
    pub fn hull(self, other: IVal) -> IVal {
        IVal { lo: self.lo.min(other.lo), hi: self.hi.max(other.hi) }
    }

    pub fn intersect(self, other: IVal) -> Option<IVal> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo <= hi).then_some(IVal { lo, hi })
    }

    /// Intersection with `[0, +inf)`, used when the exact value is known
    /// to be nonnegative.
    #[inline]
    pub fn clamp_nonneg(self) -> IVal {
        IVal { lo: self.lo.max(0.0), hi: self.hi.max(0.0) }
    }

    /// Widen by `r` on both sides.
    pub fn inflate(self, r: f64) -> IVal {
        IVal { lo: sub_down(self.lo, r), hi: add_up(self.hi, r) }
    }

    pub fn abs(self) -> IVal {
        if self.lo >= 0.0 {
            self
        } else if self.hi <= 0.0 {
            -self
        } else {
            IVal { lo: 0.0, hi: self.mag() }
        }
    }

    pub fn sqr(self) -> IVal {
        let a = self.abs();
        IVal { lo: mul_down(a.lo, a.lo), hi: mul_up(a.hi, a.hi) }
    }

    pub fn sqrt(self) -> Result<IVal> {
        if self.lo < 0.0 {
            return Err(Error::InvalidParams(format!("sqrt of {self:?}")));
        }
        Ok(IVal { lo: sqrt_down(self.lo), hi: sqrt_up(self.hi) })
    }

    pub fn min(self, o: IVal) -> IVal {
        IVal { lo: self.lo.min(o.lo), hi: self.hi.min(o.hi) }
    }

    pub fn max(self, o: IVal) -> IVal {
        IVal { lo: self.lo.max(o.lo), hi: self.hi.max(o.hi) }
    }

    pub fn checked_div(self, o: IVal) -> Result<IVal> {
        if o.lo <= 0.0 && o.hi >= 0.0 {
            return Err(Error::DivisionByZero { lo: o.lo, hi: o.hi });
        }
        let c = [
            (self.lo, o.lo),
            (self.lo, o.hi),
            (self.hi, o.lo),
            (self.hi, o.hi),
        ];
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (a, b) in c {
            lo = lo.min(div_down(a, b));
            hi = hi.max(div_up(a, b));
        }
        Ok(IVal { lo, hi })
    }

    /// Multiply by a scalar.
    #[inline]
    pub fn scale(self, s: f64) -> IVal {
        if s >= 0.0 {
            IVal { lo: mul_down(self.lo, s), hi: mul_up(self.hi, s) }
        } else {
            IVal { lo: mul_down(self.hi, s), hi: mul_up(self.lo, s) }
        }
    }

    /// Divide by a nonzero scalar.
    pub fn div_scalar(self, s: f64) -> Result<IVal> {
        if s == 0.0 || s.is_nan() {
            return Err(Error::DivisionByZero { lo: s, hi: s });
        }
        Ok(if s > 0.0 {
            IVal { lo: div_down(self.lo, s), hi: div_up(self.hi, s) }
        } else {
            IVal { lo: div_down(self.hi, s), hi: div_up(self.lo, s) }
        })
    }

    /// `sin` over the interval.
    pub fn sin(self) -> IVal {
        trig::sin_interval(self)
    }

    /// `cos` over the interval.
    pub fn cos(self) -> IVal {
        trig::cos_interval(self)
    }

    /// `sin(2 pi x)` over the interval.
    pub fn sin_2pi(self) -> IVal {
        (IVal::TWO_PI * self).sin()
    }

    /// `cos(2 pi x)` over the interval.
    pub fn cos_2pi(self) -> IVal {
        (IVal::TWO_PI * self).cos()
    }
}

impl From<f64> for IVal {
    fn from(x: f64) -> Self {
        IVal::point(x)
    }
}

impl Neg for IVal {
    type Output = IVal;
    #[inline]
    fn neg(self) -> IVal {
        IVal { lo: -self.hi, hi: -self.lo }
    }
}

impl Add for IVal {
    type Output = IVal;
    #[inline]
    fn add(self, o: IVal) -> IVal {
        IVal { lo: add_down(self.lo, o.lo), hi: add_up(self.hi, o.hi) }
    }
}

impl Sub for IVal {
    type Output = IVal;
    #[inline]
    fn sub(self, o: IVal) -> IVal {
        IVal { lo: sub_down(self.lo, o.hi), hi: sub_up(self.hi, o.lo) }
    }
}

impl Mul for IVal {
    type Output = IVal;
    #[inline]
    fn mul(self, o: IVal) -> IVal {
        if self.lo >= 0.0 && o.lo >= 0.0 {
            return IVal { lo: mul_down(self.lo, o.lo), hi: mul_up(self.hi, o.hi) };
        }
        let lo = mul_down(self.lo, o.lo)
            .min(mul_down(self.lo, o.hi))
            .min(mul_down(self.hi, o.lo))
            .min(mul_down(self.hi, o.hi));
        let hi = mul_up(self.lo, o.lo)
            .max(mul_up(self.lo, o.hi))
            .max(mul_up(self.hi, o.lo))
            .max(mul_up(self.hi, o.hi));
        IVal { lo, hi }
    }
}

impl Add<f64> for IVal {
    type Output = IVal;
    #[inline]
    fn add(self, o: f64) -> IVal {
        IVal { lo: add_down(self.lo, o), hi: add_up(self.hi, o) }
    }
}

impl Sub<f64> for IVal {
    type Output = IVal;
    #[inline]
    fn sub(self, o: f64) -> IVal {
        IVal { lo: sub_down(self.lo, o), hi: sub_up(self.hi, o) }
    }
}

impl Mul<f64> for IVal {
    type Output = IVal;
    #[inline]
    fn mul(self, o: f64) -> IVal {
        self.scale(o)
    }
}

impl AddAssign for IVal {
    #[inline]
    fn add_assign(&mut self, o: IVal) {
        *self = *self + o;
    }
}

impl SubAssign for IVal {
    #[inline]
    fn sub_assign(&mut self, o: IVal) {
        *self = *self - o;
    }
}

impl std::iter::Sum for IVal {
    fn sum<I: Iterator<Item = IVal>>(iter: I) -> IVal {
        iter.fold(IVal::ZERO, |a, b| a + b)
    }
}

/// Upper bound on `sum |x_i| / n`, the L1 norm of a cell-average vector.
pub fn l1_norm_upper(x: &[IVal]) -> f64 {
    let mut s = 0.0;
    for v in x {
        s = add_up(s, v.mag());
    }
    div_up(s, x.len() as f64)
}

/// Upper bound on the oscillation `max x - min x` of a vector of intervals.
pub fn osc_upper(x: &[IVal]) -> f64 {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in x {
        lo = lo.min(v.lo);
        hi = hi.max(v.hi);
    }
    if x.is_empty() {
        0.0
    } else {
        sub_up(hi, lo)
    }
}

/// Enclosure of `sum x_i / n`, the integral of a cell-average vector.
pub fn integral(x: &[IVal]) -> IVal {
    let s: IVal = x.iter().copied().sum();
    s.div_scalar(x.len() as f64).expect("nonempty vector")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_integer_sums_stay_points() {
        assert_eq!(IVal::point(1.0) + IVal::point(2.0), IVal::point(3.0));
        assert_eq!(IVal::point(3.0) * IVal::point(7.0), IVal::point(21.0));
        assert_eq!(IVal::point(1.0).checked_div(IVal::point(4.0)).unwrap(), IVal::point(0.25));
    }

    #[test]
    fn sign_cases_of_multiplication() {
        assert_eq!(IVal::new(0.0, 1.0) * IVal::new(-1.0, 1.0), IVal::new(-1.0, 1.0));
        assert_eq!(IVal::new(-2.0, -1.0) * IVal::new(3.0, 4.0), IVal::new(-8.0, -3.0));
    }

    #[test]
    fn one_tenth_plus_two_tenths() {
        let s = IVal::point(0.1) + IVal::point(0.2);
        // 0.1 + 0.2 as reals, with the binary inputs, lies strictly between
        // two neighbouring doubles.
        assert!(s.width() <= 2.0 * f64::EPSILON * 0.3);
        assert!(s.lo() < s.hi());
        assert!(s.contains(0.30000000000000004) || s.contains(0.3));
    }

    #[test]
    fn division_by_zero_is_reported() {
        let e = IVal::ONE.checked_div(IVal::new(-1.0, 1.0)).unwrap_err();
        assert!(matches!(e, Error::DivisionByZero { .. }));
    }

    #[test]
    fn pi_enclosures_bracket_pi() {
        assert!(IVal::PI.lo() < IVal::PI.hi());
        assert_eq!(IVal::PI.hi(), std::f64::consts::PI.next_up());
        assert_eq!(IVal::HALF_PI.hi(), std::f64::consts::FRAC_PI_2.next_up());
    }

    #[test]
    fn directed_division_brackets_one_third() {
        let t = IVal::ratio(1.0, 3.0);
        assert_eq!(t.hi(), t.lo().next_up());
        assert!(t.lo() * 3.0 <= 1.0);
    }
}
