//! Exact rationals for metric values.
//!
//! Every metric is a ratio of integer totals (rounds, micro-dollars,
//! milliseconds, counts), so it is kept as a fraction and rounded once,
//! in decimal, when rendered. No float summation order leaks into output.

use std::cmp::Ordering;
use std::fmt;

use serde::{Serialize, Serializer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Rounding {
    /// Ties away from zero.
    HalfUp,
    /// Ties to the even neighbour.
    HalfEven,
    /// Round the nearest `f64` instead of the exact value, as float
    /// formatting does: 17/40 prints as 0.42, 173/40 as 4.33.
    Float,
}

/// `num / den` with `den > 0`.
#[derive(Debug, Clone, Copy)]
pub struct Frac {
    num: i128,
    den: i128,
}

impl Frac {
    /// `None` when `den` is zero.
    pub fn new(num: i128, den: i128) -> Option<Frac> {
        match den.cmp(&0) {
            Ordering::Equal => None,
            Ordering::Greater => Some(Frac { num, den }),
            Ordering::Less => Some(Frac { num: -num, den: -den }),
        }
    }

    pub fn int(n: i128) -> Frac {
        Frac { num: n, den: 1 }
    }

    pub fn num(self) -> i128 {
        self.num
    }

    pub fn den(self) -> i128 {
        self.den
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// `self / other`; `None` when `other` is zero.
    pub fn div(self, other: Frac) -> Option<Frac> {
        Frac::new(self.num * other.den, self.den * other.num)
    }

    pub fn scale(self, k: i128) -> Frac {
        Frac { num: self.num * k, den: self.den }
    }

    /// Integer `round(self * 10^digits)` under `mode`.
    pub fn scaled_round(self, digits: u32, mode: Rounding) -> i128 {
        if mode == Rounding::Float {
            let text = format!("{:.*}", digits as usize, self.to_f64());
            return text.replace('.', "").parse().expect("formatted float parses");
        }
        let n = self.num * 10i128.pow(digits);
        let (q, r) = (n.div_euclid(self.den), n.rem_euclid(self.den));
        // q is floor; compare the remainder with half the denominator
        match (2 * r).cmp(&self.den) {
            Ordering::Less => q,
            Ordering::Greater => q + 1,
            Ordering::Equal => match mode {
                Rounding::HalfUp => {
                    if n >= 0 {
                        q + 1
                    } else {
                        q
                    }
                }
                Rounding::HalfEven => {
                    if q % 2 == 0 {
                        q
                    } else {
                        q + 1
                    }
                }
                Rounding::Float => unreachable!("returned above"),
            },
        }
    }

    /// Decimal rendering with exactly `digits` fractional digits.
    pub fn render(self, digits: u32, mode: Rounding) -> String {
        let v = self.scaled_round(digits, mode);
        let sign = if v < 0 { "-" } else { "" };
        let v = v.abs();
        if digits == 0 {
            return format!("{sign}{v}");
        }
        let p = 10i128.pow(digits);
        format!("{sign}{}.{:0width$}", v / p, v % p, width = digits as usize)
    }

    /// Rounded value as f64, for JSON reports.
    pub fn rounded(self, digits: u32, mode: Rounding) -> f64 {
        self.scaled_round(digits, mode) as f64 / 10f64.powi(digits as i32)
    }
}

impl PartialEq for Frac {
    fn eq(&self, other: &Self) -> bool {
        self.num * other.den == other.num * self.den
    }
}

impl Eq for Frac {}

impl PartialOrd for Frac {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Frac {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.num * other.den).cmp(&(other.num * self.den))
    }
}

impl fmt::Display for Frac {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

impl Serialize for Frac {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.to_f64())
    }
}

/// Mean of an integer total over `n` items.
pub fn mean(total: i128, n: usize) -> Option<Frac> {
    Frac::new(total, n as i128)
}
