//! Outward-rounded decimal formatting and enclosing parsers.

use super::IVal;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// An interval written as two decimal strings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecimalInterval {
    pub lo: String,
    pub hi: String,
}

impl DecimalInterval {
    pub fn from_ival(x: IVal, digits: usize) -> Self {
        DecimalInterval { lo: format_lower(x.lo(), digits), hi: format_upper(x.hi(), digits) }
    }

    pub fn to_ival(&self) -> Result<IVal> {
        let lo = parse_enclosure(&self.lo)?.lo();
        let hi = parse_enclosure(&self.hi)?.hi();
        IVal::try_new(lo, hi)
    }
}

/// Sign, significant digits (no leading zeros), and the decimal exponent of
/// the first digit.
#[derive(Debug, PartialEq)]
struct Decimal {
    neg: bool,
    digits: Vec<u8>,
    exp: i32,
}

fn exact_decimal(x: f64) -> Decimal {
    // Every finite double has a terminating decimal expansion with at most
    // 767 significant digits, so this rendering is exact.
    let s = format!("{:.780e}", x.abs());
    let (mant, exp) = s.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");
    let mut digits: Vec<u8> = mant.bytes().filter(u8::is_ascii_digit).map(|b| b - b'0').collect();
    while digits.len() > 1 && digits.last() == Some(&0) {
        digits.pop();
    }
    Decimal { neg: x < 0.0, digits, exp }
}

fn parse_decimal(s: &str) -> Result<Decimal> {
    let t = s.trim();
    let (neg, body) = match t.strip_prefix('-') {
        Some(r) => (true, r),
        None => (false, t.strip_prefix('+').unwrap_or(t)),
    };
    let (mant, exp) = match body.find(['e', 'E']) {
        Some(i) => (&body[..i], body[i + 1..].parse::<i32>().map_err(|e| Error::Parse(e.to_string()))?),
        None => (body, 0),
    };
    let (int, frac) = mant.split_once('.').unwrap_or((mant, ""));
    if int.is_empty() && frac.is_empty() || !int.bytes().chain(frac.bytes()).all(|b| b.is_ascii_digit()) {
        return Err(Error::Parse(format!("not a decimal number: {s:?}")));
    }
    let mut digits: Vec<u8> = int.bytes().chain(frac.bytes()).map(|b| b - b'0').collect();
    let mut e = exp + int.len() as i32 - 1;
    while digits.len() > 1 && digits[0] == 0 {
        digits.remove(0);
        e -= 1;
    }
    while digits.len() > 1 && digits.last() == Some(&0) {
        digits.pop();
    }
    if digits == [0] {
        e = 0;
    }
    Ok(Decimal { neg, digits, exp: e })
}

fn render(neg: bool, digits: &[u8], exp: i32) -> String {
    let mut d: Vec<u8> = digits.to_vec();
    while d.len() > 1 && d.last() == Some(&0) {
        d.pop();
    }
    if d == [0] {
        return "0".to_string();
    }
    let mut out = String::new();
    if neg {
        out.push('-');
    }
    let ds: String = d.iter().map(|&b| (b + b'0') as char).collect();
    if (-6..21).contains(&exp) {
        if exp < 0 {
            out.push_str("0.");
            for _ in 0..(-exp - 1) {
                out.push('0');
            }
            out.push_str(&ds);
        } else {
            let int_len = exp as usize + 1;
            if ds.len() <= int_len {
                out.push_str(&ds);
                for _ in ds.len()..int_len {
                    out.push('0');
                }
            } else {
                out.push_str(&ds[..int_len]);
                out.push('.');
                out.push_str(&ds[int_len..]);
            }
        }
    } else {
        out.push_str(&ds[..1]);
        if ds.len() > 1 {
            out.push('.');
            out.push_str(&ds[1..]);
        }
        out.push_str(&format!("e{exp}"));
    }
    out
}

/// Round the magnitude to `digits` significant digits, away from zero when
/// `away` is set and toward zero otherwise.
fn round_digits(x: f64, digits: usize, away: bool) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    let d = exact_decimal(x);
    let digits = digits.max(1);
    if d.digits.len() <= digits {
        return render(d.neg, &d.digits, d.exp);
    }
    let mut kept = d.digits[..digits].to_vec();
    let mut exp = d.exp;
    let tail_nonzero = d.digits[digits..].iter().any(|&b| b != 0);
    if away && tail_nonzero {
        let mut i = kept.len();
        loop {
            if i == 0 {
                kept.insert(0, 1);
                kept.pop();
                exp += 1;
                break;
            }
            i -= 1;
            if kept[i] == 9 {
                kept[i] = 0;
            } else {
                kept[i] += 1;
                break;
            }
        }
    }
    render(d.neg, &kept, exp)
}

/// Decimal string that is `<= x`, with at most `digits` significant digits.
pub fn format_lower(x: f64, digits: usize) -> String {
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    round_digits(x, digits, x < 0.0)
}

/// Decimal string that is `>= x`, with at most `digits` significant digits.
pub fn format_upper(x: f64, digits: usize) -> String {
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    round_digits(x, digits, x > 0.0)
}

/// Tightest double interval containing the real number written in `s`.
pub fn parse_enclosure(s: &str) -> Result<IVal> {
    match s.trim() {
        "inf" => return Ok(IVal::new(f64::MAX, f64::INFINITY)),
        "-inf" => return Ok(IVal::new(f64::NEG_INFINITY, -f64::MAX)),
        _ => {}
    }
    let want = parse_decimal(s)?;
    let x: f64 = s.trim().parse().map_err(|e: std::num::ParseFloatError| Error::Parse(e.to_string()))?;
    if !x.is_finite() {
        return Err(Error::Parse(format!("out of range: {s:?}")));
    }
    let mut got = exact_decimal(x);
    if x == 0.0 {
        got = Decimal { neg: want.neg, digits: vec![0], exp: 0 };
    }
    if got.digits == want.digits && got.exp == want.exp {
        return Ok(IVal::point(x));
    }
    Ok(IVal::new(x.next_down(), x.next_up()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn outward_rounding_of_one_tenth() {
        // The double nearest 0.1 is slightly above 0.1.
        assert_eq!(format_lower(0.1, 5), "0.1");
        assert_eq!(format_upper(0.1, 5), "0.10001");
        assert_eq!(format_lower(-0.1, 5), "-0.10001");
        assert_eq!(format_upper(-0.1, 5), "-0.1");
    }

    #[test]
    fn exact_values_print_exactly() {
        assert_eq!(format_lower(0.25, 3), "0.25");
        assert_eq!(format_upper(3.0, 3), "3");
        assert_eq!(format_upper(1e-9, 3), "1.01e-9");
        assert_eq!(format_lower(1e-9, 3), "1e-9");
    }

    #[test]
    fn carries_propagate() {
        assert_eq!(format_upper(0.99999999, 3), "1");
        assert_eq!(format_upper(9.999e30, 2), "1e31");
    }

    #[test]
    fn parse_encloses() {
        assert_eq!(parse_enclosure("0.25").unwrap(), IVal::point(0.25));
        let t = parse_enclosure("0.1").unwrap();
        assert!(t.lo() < 0.1 && t.hi() >= 0.1);
        let r = parse_enclosure("7.80594e-1").unwrap();
        assert!(r.contains(0.780594));
    }

    #[test]
    fn round_trip_contains_original() {
        for &x in &[0.7502, -3.4567e-9, 123456.789, 1.0 / 3.0] {
            let lo = parse_enclosure(&format_lower(x, 12)).unwrap();
            let hi = parse_enclosure(&format_upper(x, 12)).unwrap();
            assert!(lo.lo() <= x && x <= hi.hi());
        }
    }
}
