//! A float with an `f64` mantissa and a 64-bit binary exponent.
//!
//! The transformed rewards `h / G` and their arguments `F / G` range over
//! thousands of orders of magnitude between the far-left entry level and
//! `theta`; this type keeps `f64` relative precision over that whole range.

use std::cmp::Ordering;
use std::f64::consts::LN_2;
use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ext {
    /// Zero, or `0.5 <= |m| < 1`.
    m: f64,
    e: i64,
}

/// Splits finite nonzero `x` into `m * 2^e` with `0.5 <= |m| < 1`.
fn frexp(x: f64) -> (f64, i64) {
    let bits = x.to_bits();
    let raw = ((bits >> 52) & 0x7ff) as i64;
    if raw == 0 {
        // Subnormal: scale into the normal range first.
        let (m, e) = frexp(x * 2f64.powi(64));
        return (m, e - 64);
    }
    let m = f64::from_bits((bits & !(0x7ff << 52)) | (1022 << 52));
    (m, raw - 1022)
}

fn ldexp(m: f64, e: i64) -> f64 {
    if e > 2100 {
        return m * f64::INFINITY;
    }
    if e < -2200 {
        return m * 0.0;
    }
    // Two steps so intermediate powers stay representable.
    let half = e / 2;
    m * 2f64.powi(half as i32) * 2f64.powi((e - half) as i32)
}

impl Ext {
    pub const ZERO: Ext = Ext { m: 0.0, e: 0 };

    fn normalized(m: f64, e: i64) -> Self {
        if m == 0.0 || !m.is_finite() {
            return Ext { m, e: 0 };
        }
        let (fm, fe) = frexp(m);
        Ext { m: fm, e: e + fe }
    }

    pub fn new(x: f64) -> Self {
        Self::normalized(x, 0)
    }

    /// `sign * exp(ln_abs)`.
    pub fn from_ln(sign: f64, ln_abs: f64) -> Self {
        if sign == 0.0 || ln_abs == f64::NEG_INFINITY {
            return Self::ZERO;
        }
        let e = (ln_abs / LN_2).floor() as i64 + 1;
        let m = (ln_abs - e as f64 * LN_2).exp();
        Self::normalized(sign.signum() * m, e)
    }

    pub fn is_zero(self) -> bool {
        self.m == 0.0
    }

    pub fn signum(self) -> f64 {
        if self.m == 0.0 {
            0.0
        } else {
            self.m.signum()
        }
    }

    pub fn ln_abs(self) -> f64 {
        if self.m == 0.0 {
            return f64::NEG_INFINITY;
        }
        self.m.abs().ln() + self.e as f64 * LN_2
    }

    pub fn to_f64(self) -> f64 {
        ldexp(self.m, self.e)
    }

    pub fn abs(self) -> Self {
        Ext {
            m: self.m.abs(),
            e: self.e,
        }
    }
}

impl Add for Ext {
    type Output = Ext;
    fn add(self, rhs: Ext) -> Ext {
        if self.m == 0.0 {
            return rhs;
        }
        if rhs.m == 0.0 {
            return self;
        }
        let (hi, lo) = if self.e >= rhs.e {
            (self, rhs)
        } else {
            (rhs, self)
        };
        let gap = hi.e - lo.e;
        if gap > 1100 {
            return hi;
        }
        Ext::normalized(hi.m + ldexp(lo.m, -gap), hi.e)
    }
}

impl Neg for Ext {
    type Output = Ext;
    fn neg(self) -> Ext {
        Ext {
            m: -self.m,
            e: self.e,
        }
    }
}

impl Sub for Ext {
    type Output = Ext;
    fn sub(self, rhs: Ext) -> Ext {
        self + (-rhs)
    }
}

impl Mul for Ext {
    type Output = Ext;
    fn mul(self, rhs: Ext) -> Ext {
        Ext::normalized(self.m * rhs.m, self.e + rhs.e)
    }
}

impl Div for Ext {
    type Output = Ext;
    fn div(self, rhs: Ext) -> Ext {
        Ext::normalized(self.m / rhs.m, self.e - rhs.e)
    }
}

impl PartialOrd for Ext {
    fn partial_cmp(&self, other: &Ext) -> Option<Ordering> {
        (*self - *other).signum().partial_cmp(&0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_and_arithmetic() {
        for &x in &[1.0, -3.5, 1e-300, 7e300, 5e-320] {
            assert_eq!(Ext::new(x).to_f64(), x);
        }
        let a = Ext::from_ln(1.0, -2000.0);
        let b = Ext::from_ln(1.0, -2001.0);
        assert!(((a + b).ln_abs() - (-2000.0 + (1.0 + (-1f64).exp()).ln())).abs() < 1e-12);
        assert!(((a * b).ln_abs() + 4001.0).abs() < 1e-12);
        assert!(((a / b).to_f64() - 1f64.exp()).abs() < 1e-12);
        assert!(a > b && b > Ext::ZERO && -a < -b);
        assert_eq!((a - a).signum(), 0.0);
        assert_eq!(Ext::from_ln(1.0, 5000.0).to_f64(), f64::INFINITY);
    }
}
