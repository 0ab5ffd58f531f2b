//! Bracketed scalar root finding used by every threshold solver.
//!
//! The solvers only ever need roots that are unique inside a known bracket,
//! so plain bisection is used throughout; it cannot be thrown off by the
//! nearly flat residuals that appear in the deep left tail.

use crate::error::{Error, Result};

/// Absolute tolerance in log-price for landmark and threshold roots.
pub const ROOT_TOL: f64 = 1e-12;
/// Iteration cap for a single bisection.
pub const MAX_BISECTIONS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub x: f64,
    /// Width of the final bracket.
    pub bracket_width: f64,
    pub iterations: usize,
}

/// Bisection on `[lo, hi]`; `f(lo)` and `f(hi)` must not share a strict sign.
pub fn bisect<F>(what: &'static str, mut f: F, lo: f64, hi: f64, tol: f64) -> Result<Root>
where
    F: FnMut(f64) -> Result<f64>,
{
    let (mut lo, mut hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let mut f_lo = f(lo)?;
    let f_hi = f(hi)?;
    if f_lo == 0.0 {
        return Ok(Root {
            x: lo,
            bracket_width: 0.0,
            iterations: 0,
        });
    }
    if f_hi == 0.0 {
        return Ok(Root {
            x: hi,
            bracket_width: 0.0,
            iterations: 0,
        });
    }
    if f_lo.signum() == f_hi.signum() || f_lo.is_nan() || f_hi.is_nan() {
        return Err(Error::SolverFailure {
            what,
            lo,
            hi,
            f_lo,
            f_hi,
            iterations: 0,
        });
    }
    for it in 1..=MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= tol || mid <= lo || mid >= hi {
            return Ok(Root {
                x: mid,
                bracket_width: hi - lo,
                iterations: it - 1,
            });
        }
        let f_mid = f(mid)?;
        if f_mid.is_nan() {
            return Err(Error::SolverFailure {
                what,
                lo,
                hi,
                f_lo,
                f_hi: f_mid,
                iterations: it,
            });
        }
        if f_mid == 0.0 {
            return Ok(Root {
                x: mid,
                bracket_width: 0.0,
                iterations: it,
            });
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::SolverFailure {
        what,
        lo,
        hi,
        f_lo,
        f_hi,
        iterations: MAX_BISECTIONS,
    })
}

/// Walks away from `start` in `direction` (+1 or -1), doubling the step each
/// time, until `f` changes sign. Returns the ordered bracket.
pub fn expand_bracket<F>(
    what: &'static str,
    mut f: F,
    start: f64,
    first_step: f64,
    direction: f64,
) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let f0 = f(start)?;
    if f0 == 0.0 {
        return Ok((start, start));
    }
    let mut prev = start;
    let mut step = first_step.abs().max(1e-6);
    for _ in 0..64 {
        let probe = start + direction.signum() * step;
        let fp = f(probe)?;
        if fp.is_nan() {
            break;
        }
        if fp == 0.0 || fp.signum() != f0.signum() {
            return Ok(if prev < probe {
                (prev, probe)
            } else {
                (probe, prev)
            });
        }
        prev = probe;
        step *= 2.0;
    }
    Err(Error::BracketFailure {
        what,
        start,
        last: prev,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_sqrt_two() {
        let r = bisect("sqrt", |x| Ok(x * x - 2.0), 0.0, 2.0, 1e-14).unwrap();
        assert!((r.x - 2f64.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn rejects_same_sign() {
        let err = bisect("bad", |x| Ok(x * x + 1.0), -1.0, 1.0, 1e-12).unwrap_err();
        assert!(matches!(err, Error::SolverFailure { .. }));
    }

    #[test]
    fn expansion_reaches_far_root() {
        let (lo, hi) = expand_bracket("far", |x| Ok(100.0 - x), 0.0, 1.0, 1.0).unwrap();
        assert!(lo < 100.0 && hi >= 100.0);
        let (lo, hi) = expand_bracket("left", |x| Ok(x + 37.0), 0.0, 0.5, -1.0).unwrap();
        assert!(lo <= -37.0 && hi > -37.0);
    }
}
