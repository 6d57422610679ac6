//! Sine and cosine enclosures.
//!
//! Arguments are reduced modulo pi/2 with a three-part split of pi/2
//! (Cody-Waite style) whose tail is bounded explicitly; the reduced
//! argument is then fed to Taylor polynomials with a Lagrange remainder.

use super::{mul_up, IVal};

// pi/2 = P1 + P2 + P3 + t with |t| < 2e-37, below half an ulp of P3.
// P1 and P2 carry 33 bits so k * P1 and k * P2 are exact for |k| < 2^20.
const P1: f64 = 1.570_796_326_734_125_614_17;
const P2: f64 = 6.077_100_506_303_965_976_60e-11;
const P3: f64 = 2.022_266_248_795_950_631_54e-21;
const MAX_REDUCE: f64 = 1.5e6;

// 1/(2k+1)! and 1/(2k)! enclosures for k = 0..=10, built once.
fn inv_factorials() -> &'static [IVal; 23] {
    use std::sync::OnceLock;
    static T: OnceLock<[IVal; 23]> = OnceLock::new();
    T.get_or_init(|| {
        let mut out = [IVal::ONE; 23];
        let mut f = IVal::ONE;
        for (k, slot) in out.iter_mut().enumerate().skip(1) {
            f = f * IVal::point(k as f64);
            *slot = IVal::ONE.checked_div(f).expect("factorial is positive");
        }
        out
    })
}

/// sin and cos of a reduced argument `r` with |r| <= 0.8.
fn sincos_reduced(r: IVal) -> (IVal, IVal) {
    let f = inv_factorials();
    let r2 = r.sqr();
    let m = r.mag();
    // sin r = r - r^3/3! + ... - r^19/19!, remainder <= m^21/21!
    let mut s = IVal::point(0.0);
    for k in (1..=9).rev() {
        let c = if k % 2 == 1 { -f[2 * k + 1] } else { f[2 * k + 1] };
        s = c + r2 * s;
    }
    let rem_s = mul_up(m.powi(21), f[21].hi()) * 1.0000001;
    let sin = r + r * (r2 * s) + IVal::new(-rem_s, rem_s);
    // cos r = 1 - r^2/2! + ... + r^20/20!, remainder <= m^22/22!
    let mut c = IVal::point(0.0);
    for k in (1..=10).rev() {
        let coef = if k % 2 == 1 { -f[2 * k] } else { f[2 * k] };
        c = coef + r2 * c;
    }
    let rem_c = mul_up(m.powi(22), f[22].hi()) * 1.0000001;
    let cos = IVal::ONE + r2 * c + IVal::new(-rem_c, rem_c);
    (clamp_unit(sin), clamp_unit(cos))
}

fn clamp_unit(x: IVal) -> IVal {
    IVal::new(x.lo().max(-1.0), x.hi().min(1.0))
}

/// Enclosures of (sin x, cos x) for a point `x`.
pub fn sincos_point(x: f64) -> (IVal, IVal) {
    if !x.is_finite() || x.abs() > MAX_REDUCE {
        let u = IVal::new(-1.0, 1.0);
        return (u, u);
    }
    let k = (x * std::f64::consts::FRAC_2_PI).round();
    // x - k*P1 is computed with directed rounding; k*P1 and k*P2 are exact.
    let t = IVal::point(x) - IVal::point(k * P1);
    let t = t - IVal::point(k * P2);
    let p3 = IVal::new(P3.next_down(), P3.next_up());
    let t = t - p3.scale(k);
    let (s, c) = sincos_reduced(t);
    match (k as i64).rem_euclid(4) {
        0 => (s, c),
        1 => (c, -s),
        2 => (-s, -c),
        _ => (-c, s),
    }
}

/// Enclosure of `sin x` for a point `x`.
pub fn sin_point(x: f64) -> IVal {
    sincos_point(x).0
}

/// Enclosure of `cos x` for a point `x`.
pub fn cos_point(x: f64) -> IVal {
    sincos_point(x).1
}

/// Whether `[a.lo, a.hi]` may contain a point `offset + 2 pi k`.
fn may_contain_phase(a: IVal, offset: IVal) -> bool {
    // t = (a - offset) / 2pi; the interval contains such a point iff
    // ceil(t.lo) <= floor(t.hi). Rounding is absorbed by widening.
    let t = (a - offset)
        .checked_div(IVal::TWO_PI)
        .expect("2 pi is positive");
    let lo = t.lo().next_down();
    let hi = t.hi().next_up();
    lo.ceil() <= hi.floor()
}

pub fn sin_interval(a: IVal) -> IVal {
    if a.lo() == a.hi() {
        return sin_point(a.lo());
    }
    if a.width() >= 6.3 || !a.lo().is_finite() || !a.hi().is_finite() {
        return IVal::new(-1.0, 1.0);
    }
    let mut r = sin_point(a.lo()).hull(sin_point(a.hi()));
    if may_contain_phase(a, IVal::HALF_PI) {
        r = r.hull(IVal::ONE);
    }
    if may_contain_phase(a, -IVal::HALF_PI) {
        r = r.hull(-IVal::ONE);
    }
    r
}

pub fn cos_interval(a: IVal) -> IVal {
    if a.lo() == a.hi() {
        return cos_point(a.lo());
    }
    if a.width() >= 6.3 || !a.lo().is_finite() || !a.hi().is_finite() {
        return IVal::new(-1.0, 1.0);
    }
    let mut r = cos_point(a.lo()).hull(cos_point(a.hi()));
    if may_contain_phase(a, IVal::ZERO) {
        r = r.hull(IVal::ONE);
    }
    if may_contain_phase(a, IVal::PI) {
        r = r.hull(-IVal::ONE);
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ulps(x: IVal) -> f64 {
        let m = x.mag();
        let ulp = m.next_up() - m;
        x.width() / ulp
    }

    #[test]
    fn sin_of_zero_is_exact_zero() {
        let s = sin_point(0.0);
        assert!(s.contains(0.0));
        assert!(s.width() < 1e-300);
    }

    #[test]
    fn sin_one_is_tight() {
        let s = sin_point(1.0);
        assert!(s.contains(0.8414709848078965));
        assert!(ulps(s) <= 4.0, "width {} ulp", ulps(s));
    }

    #[test]
    fn quarter_period_is_monotone_enclosure() {
        let s = IVal::new(0.0, IVal::HALF_PI.hi()).sin();
        assert!(s.contains(0.0) && s.contains(1.0));
        assert!(s.lo() >= -1e-15 && s.hi() <= 1.0);
    }

    #[test]
    fn multiples_of_half_pi() {
        assert!(sin_point(std::f64::consts::PI).contains(1.2246467991473532e-16));
        assert!(cos_point(std::f64::consts::PI).contains(-1.0));
        let c = cos_point(-7.5);
        assert!(c.contains((-7.5f64).cos()));
    }

    #[test]
    fn interval_with_interior_extremum() {
        let s = IVal::new(1.0, 2.0).sin();
        assert_eq!(s.hi(), 1.0);
        assert!(s.lo() <= 1f64.sin());
    }
}
