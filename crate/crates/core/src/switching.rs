//! Infinitely many round trips.
//!
//! The problem either never enters the market (three distinct reasons,
//! see [`SwitchingCase`]) or trades recurrently: first entry on
//! `[a_tilde, d_tilde]`, exits at `b_tilde`, re-entries at `d_tilde`.
//!
//! The solver works with the integral functionals
//!
//! ```text
//! q(x)      = int_{-inf}^x Psi (L - r) h_s
//! q_F(x, z) = int_{-inf}^x Psi (L - r) h_b - int_{-inf}^z Psi (L - r) h_s
//! q_G(x, z) = int_x^inf Phi (L - r) h_b - int_z^inf Phi (L - r) h_s
//! ```
//!
//! Green's identity collapses each integral to boundary terms,
//! `int_{-inf}^x Psi (L - r) h = (h' F - h F') / W` and
//! `int_x^inf Phi (L - r) h = (h G' - h' G) / W`, which is what the solver
//! evaluates. The quadrature forms are kept for cross-checking.

use std::cell::RefCell;

use serde::{Deserialize, Serialize};

use crate::double_stopping::{solve_exit, RootDiagnostic};
use crate::eigen::{log_add, EigenPoint, Eigenfunctions};
use crate::error::{Error, Result};
use crate::model::{f_buy, f_sell, landmarks, reward_buy, reward_sell, Costs, FbRoots};
use crate::quadrature::integrate_breaks;
use crate::roots::{bisect, expand_bracket, Root, ROOT_TOL};

/// Bisection tolerance for the nested `(d_tilde, b_tilde)` system.
pub const SYSTEM_TOL: f64 = 1e-11;

/// Relative tolerance under which the entry and exit ratios count as equal;
/// a tie is classified as [`SwitchingCase::EntryTooCostly`].
pub const RATIO_TIE: f64 = 1e-10;

/// Why the switching problem does or does not trade.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SwitchingCase {
    /// `f_b` has no sign change: buying is never locally attractive.
    NoBuyRegion,
    /// An entry level exists but its cost ratio is not beaten by the exit.
    EntryTooCostly,
    /// `h_b / F` has no stationary point between the roots of `f_b`.
    NoEntryLevel,
    Recurrent,
}

impl SwitchingCase {
    pub fn trades(self) -> bool {
        self == SwitchingCase::Recurrent
    }
}

/// Every comparison made while classifying.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseReport {
    pub fb_roots: FbRoots,
    pub b_star: f64,
    pub a_tilde_exists: bool,
    pub a_tilde: Option<f64>,
    /// `h_b(a_tilde) / F(a_tilde)`.
    pub ratio_entry: Option<f64>,
    /// `h_s(b*) / F(b*)`.
    pub ratio_exit: f64,
    pub ratio_tie: bool,
    /// `ln |int_{-inf}^{x_b1} Psi e^x f_b|`, by quadrature.
    pub integral_test_lhs_ln: Option<f64>,
    /// `ln int_{x_b1}^{x_b2} Psi e^x f_b`, by quadrature.
    pub integral_test_rhs_ln: Option<f64>,
    pub integral_test_holds: Option<bool>,
    pub case: SwitchingCase,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SwitchingSolution {
    /// Never enter; a held unit is sold at `b_star`.
    NoEntry { b_star: f64 },
    Recurrent {
        a_tilde: f64,
        d_tilde: f64,
        b_tilde: f64,
        /// Flat value is `coef_below * F` below `a_tilde`.
        coef_below: f64,
        /// Held value is `coef_mid * F` below `b_tilde`.
        coef_mid: f64,
        /// Flat value is `coef_above * G` above `d_tilde`.
        coef_above: f64,
        diagnostics: SwitchingDiagnostics,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwitchingDiagnostics {
    pub a_tilde: RootDiagnostic,
    pub d_tilde: RootDiagnostic,
    /// `|q_F(d_tilde, b_tilde)|` relative to the size of its terms.
    pub q_f_residual: f64,
    /// `|q_G(d_tilde, b_tilde)|` relative to the size of its terms.
    pub q_g_residual: f64,
}

impl SwitchingSolution {
    pub fn exit_level(&self) -> f64 {
        match *self {
            SwitchingSolution::NoEntry { b_star } => b_star,
            SwitchingSolution::Recurrent { b_tilde, .. } => b_tilde,
        }
    }

    /// `[lowest, highest]` entry levels, if the solution ever enters.
    pub fn entry_interval(&self) -> Option<(f64, f64)> {
        match *self {
            SwitchingSolution::NoEntry { .. } => None,
            SwitchingSolution::Recurrent {
                a_tilde, d_tilde, ..
            } => Some((a_tilde, d_tilde)),
        }
    }

    /// Moves the exit level and rescales the held-value coefficient below it
    /// so that `V~` stays continuous there (smooth fit is lost). Used to check
    /// that verification notices a wrong threshold.
    pub fn with_exit_level(&self, eig: &Eigenfunctions, costs: &Costs, level: f64) -> Result<Self> {
        let mut out = self.clone();
        if let SwitchingSolution::Recurrent {
            b_tilde,
            coef_mid,
            coef_above,
            ..
        } = &mut out
        {
            let pt = eig.point(level)?;
            let held = (coef_above.ln() + pt.ln_g).exp() + reward_sell(level, costs);
            *coef_mid = held / pt.ln_f.exp();
            *b_tilde = level;
        } else if let SwitchingSolution::NoEntry { b_star } = &mut out {
            *b_star = level;
        }
        Ok(out)
    }
}

/// A quantity `sign * exp(ln_abs)` that may be far outside `f64` range.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Signed {
    sign: f64,
    ln_abs: f64,
}

impl Signed {
    fn new(numerator: f64, ln_denominator: f64) -> Self {
        Self {
            sign: numerator.signum() * (numerator != 0.0) as i32 as f64,
            ln_abs: numerator.abs().ln() - ln_denominator,
        }
    }

    fn value(self) -> f64 {
        self.sign * self.ln_abs.exp()
    }

    /// `(self - other) / max(|self|, |other|)`, exact in sign.
    fn relative_gap(self, other: Signed) -> f64 {
        if self.sign == 0.0 && other.sign == 0.0 {
            return 0.0;
        }
        let top = self.ln_abs.max(other.ln_abs);
        let a = if self.sign == 0.0 {
            0.0
        } else {
            self.sign * (self.ln_abs - top).exp()
        };
        let b = if other.sign == 0.0 {
            0.0
        } else {
            other.sign * (other.ln_abs - top).exp()
        };
        a - b
    }
}

/// `int_{-inf}^x Psi (L - r) h` for a reward with value `h` and slope `dh`.
fn lower_green(pt: &EigenPoint, h: f64, dh: f64) -> Signed {
    Signed::new(dh - h * pt.dlog_f, pt.ln_g + pt.ln_spread())
}

/// `int_x^inf Phi (L - r) h`.
fn upper_green(pt: &EigenPoint, h: f64, dh: f64) -> Signed {
    Signed::new(h * pt.dlog_g - dh, pt.ln_f + pt.ln_spread())
}

fn sell_at(x: f64, costs: &Costs) -> (f64, f64) {
    (reward_sell(x, costs), x.exp())
}

fn buy_at(x: f64, costs: &Costs) -> (f64, f64) {
    (reward_buy(x, costs), x.exp())
}

/// `q(x)`; underflows to `0` far below `theta`.
pub fn q(eig: &Eigenfunctions, costs: &Costs, x: f64) -> Result<f64> {
    let (h, dh) = sell_at(x, costs);
    Ok(lower_green(&eig.point(x)?, h, dh).value())
}

/// `q_F(x, z)`.
pub fn q_f(eig: &Eigenfunctions, costs: &Costs, x: f64, z: f64) -> Result<f64> {
    let (hb, dhb) = buy_at(x, costs);
    let (hs, dhs) = sell_at(z, costs);
    Ok(lower_green(&eig.point(x)?, hb, dhb).value() - lower_green(&eig.point(z)?, hs, dhs).value())
}

/// `q_G(x, z)`.
pub fn q_g(eig: &Eigenfunctions, costs: &Costs, x: f64, z: f64) -> Result<f64> {
    let (hb, dhb) = buy_at(x, costs);
    let (hs, dhs) = sell_at(z, costs);
    Ok(upper_green(&eig.point(x)?, hb, dhb).value() - upper_green(&eig.point(z)?, hs, dhs).value())
}

/// Integral of `w(s) e^s f(s)` over `[lo, hi]` where `ln w` is supplied;
/// infinite ends are truncated once the envelope `ln w(s) + s` has fallen
/// `tail_cutoff` below its running peak. Returns `(ln |I|, sign I)`.
pub fn weighted_integral(
    eig: &Eigenfunctions,
    ln_weight: impl Fn(f64) -> Result<f64>,
    f: impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
) -> Result<(f64, f64)> {
    let cutoff = eig.quadrature().tail_cutoff + 10.0;
    let env = |s: f64| -> Result<f64> { Ok(ln_weight(s)? + s + (1.0 + f(s).abs()).ln()) };
    let truncate = |anchor: f64, dir: f64| -> Result<f64> {
        let mut peak = env(anchor)?;
        let mut step = 0.25;
        let mut s = anchor;
        for _ in 0..200 {
            s += dir * step;
            let e = env(s)?;
            peak = peak.max(e);
            if e < peak - cutoff {
                return Ok(s);
            }
            step = (step * 1.5).min(4.0);
        }
        Err(Error::BracketFailure {
            what: "weighted integral tail",
            start: anchor,
            last: s,
        })
    };
    let lo = if lo.is_finite() {
        lo
    } else {
        truncate(hi, -1.0)?
    };
    let hi = if hi.is_finite() {
        hi
    } else {
        truncate(lo, 1.0)?
    };
    if hi <= lo {
        return Ok((f64::NEG_INFINITY, 0.0));
    }
    let pieces = 32;
    let mut breaks = Vec::with_capacity(pieces + 1);
    let mut top = f64::NEG_INFINITY;
    for i in 0..=pieces {
        let s = lo + (hi - lo) * i as f64 / pieces as f64;
        top = top.max(env(s)?);
        breaks.push(s);
    }
    let failure = RefCell::new(None);
    let integrand = |s: f64| match ln_weight(s) {
        Ok(lw) => (lw + s - top).exp() * f(s),
        Err(e) => {
            failure.borrow_mut().get_or_insert(e);
            0.0
        }
    };
    let r = integrate_breaks(integrand, &breaks, eig.quadrature())?;
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok((top + r.value.abs().ln(), r.value.signum()))
}

/// `q(x)` by direct quadrature of its defining integral.
pub fn q_by_quadrature(eig: &Eigenfunctions, costs: &Costs, x: f64) -> Result<(f64, f64)> {
    let p = *eig.params();
    weighted_integral(
        eig,
        |s| eig.ln_psi_density(s),
        |s| f_sell(s, &p, costs),
        f64::NEG_INFINITY,
        x,
    )
}

/// `int_x^inf Phi (L - r) h_b` by quadrature, for cross-checking `q_G`.
pub fn upper_buy_integral_by_quadrature(
    eig: &Eigenfunctions,
    costs: &Costs,
    x: f64,
) -> Result<(f64, f64)> {
    let p = *eig.params();
    weighted_integral(
        eig,
        |s| eig.ln_phi_density(s),
        |s| f_buy(s, &p, costs),
        x,
        f64::INFINITY,
    )
}

/// `(ln |lhs|, ln rhs)` of the test
/// `|int_{-inf}^{x_b1} Psi e^x f_b| < int_{x_b1}^{x_b2} Psi e^x f_b`.
pub fn integral_test(
    eig: &Eigenfunctions,
    costs: &Costs,
    x_b1: f64,
    x_b2: f64,
) -> Result<(f64, f64)> {
    let p = *eig.params();
    let fb = |s: f64| f_buy(s, &p, costs);
    let lw = |s: f64| eig.ln_psi_density(s);
    let (lhs, _) = weighted_integral(eig, lw, fb, f64::NEG_INFINITY, x_b1)?;
    let (rhs, _) = weighted_integral(eig, lw, fb, x_b1, x_b2)?;
    Ok((lhs, rhs))
}

/// `e^x - h_b (F'/F)`: the sign of `(h_b / F)'`.
fn buy_ratio_slope(eig: &Eigenfunctions, costs: &Costs, x: f64) -> Result<f64> {
    let pt = eig.point(x)?;
    Ok(x.exp() - reward_buy(x, costs) * pt.dlog_f)
}

/// The stationary point of `h_b / F` between the roots of `f_b`, if any.
pub fn solve_a_tilde(eig: &Eigenfunctions, costs: &Costs) -> Result<Option<(f64, RootDiagnostic)>> {
    let lm = landmarks(eig.params(), costs)?;
    let Some((x_b1, x_b2)) = lm.fb_roots.two_roots() else {
        return Ok(None);
    };
    let f = |x: f64| buy_ratio_slope(eig, costs, x);
    if f(x_b2)? <= 0.0 || f(x_b1)? >= 0.0 {
        return Ok(None);
    }
    let root = bisect("first entry level", f, x_b1, x_b2, ROOT_TOL)?;
    let scale = root.x.exp() + reward_buy(root.x, costs) * eig.point(root.x)?.dlog_f;
    let res = f(root.x)?.abs() / scale;
    Ok(Some((
        root.x,
        RootDiagnostic {
            residual: res,
            bracket_width: root.bracket_width,
            iterations: root.iterations,
        },
    )))
}

fn ratio_over_f(eig: &Eigenfunctions, value: f64, x: f64) -> Result<f64> {
    Ok(value * (-eig.point(x)?.ln_f).exp())
}

/// Decides which regime applies, recording every comparison.
pub fn classify(eig: &Eigenfunctions, costs: &Costs) -> Result<CaseReport> {
    let lm = landmarks(eig.params(), costs)?;
    let b_star = solve_exit(eig, costs)?.b_star;
    let ratio_exit = ratio_over_f(eig, reward_sell(b_star, costs), b_star)?;
    let mut report = CaseReport {
        fb_roots: lm.fb_roots,
        b_star,
        a_tilde_exists: false,
        a_tilde: None,
        ratio_entry: None,
        ratio_exit,
        ratio_tie: false,
        integral_test_lhs_ln: None,
        integral_test_rhs_ln: None,
        integral_test_holds: None,
        case: SwitchingCase::NoBuyRegion,
    };
    let Some((x_b1, x_b2)) = lm.fb_roots.two_roots() else {
        return Ok(report);
    };
    let (lhs, rhs) = integral_test(eig, costs, x_b1, x_b2)?;
    report.integral_test_lhs_ln = Some(lhs);
    report.integral_test_rhs_ln = Some(rhs);
    report.integral_test_holds = Some(lhs < rhs);

    let Some((a_tilde, _)) = solve_a_tilde(eig, costs)? else {
        report.case = SwitchingCase::NoEntryLevel;
        return Ok(report);
    };
    let ratio_entry = ratio_over_f(eig, reward_buy(a_tilde, costs), a_tilde)?;
    report.a_tilde_exists = true;
    report.a_tilde = Some(a_tilde);
    report.ratio_entry = Some(ratio_entry);
    report.ratio_tie = (ratio_entry - ratio_exit).abs() <= RATIO_TIE * ratio_exit.abs();
    report.case = if report.ratio_tie || ratio_entry >= ratio_exit {
        SwitchingCase::EntryTooCostly
    } else {
        SwitchingCase::Recurrent
    };
    Ok(report)
}

/// Relative gap `(int^x Psi (L-r) h_b - int^z Psi (L-r) h_s)`, sign-exact.
fn q_f_gap(eig: &Eigenfunctions, costs: &Costs, x_term: Signed, z: f64) -> Result<f64> {
    let (hs, dhs) = sell_at(z, costs);
    let z_term = lower_green(&eig.point(z)?, hs, dhs);
    Ok(x_term.relative_gap(z_term))
}

/// The exit level `z > x_s` paired with entry level `x` by `q_F(x, z) = 0`.
pub fn beta(eig: &Eigenfunctions, costs: &Costs, b_star: f64, x: f64) -> Result<Root> {
    let lm = landmarks(eig.params(), costs)?;
    let (hb, dhb) = buy_at(x, costs);
    let x_term = lower_green(&eig.point(x)?, hb, dhb);
    let f = |z: f64| q_f_gap(eig, costs, x_term, z);
    if f(lm.x_s)? >= 0.0 {
        return Err(Error::BracketFailure {
            what: "paired exit level",
            start: x,
            last: lm.x_s,
        });
    }
    let (lo, hi) = if f(b_star)? >= 0.0 {
        (lm.x_s, b_star)
    } else {
        expand_bracket("paired exit level", f, b_star, 0.25, 1.0)?
    };
    bisect("paired exit level", f, lo, hi, SYSTEM_TOL)
}

/// Solves the regime reported by [`classify`].
pub fn solve_classified(
    eig: &Eigenfunctions,
    costs: &Costs,
    report: &CaseReport,
) -> Result<SwitchingSolution> {
    if !report.case.trades() {
        return Ok(SwitchingSolution::NoEntry {
            b_star: report.b_star,
        });
    }
    let (x_b1, x_b2) = report
        .fb_roots
        .two_roots()
        .expect("recurrent case has two buy roots");
    let (a_tilde, a_diag) = solve_a_tilde(eig, costs)?.expect("recurrent case has an entry level");
    debug_assert!(a_tilde > x_b1);
    let b_star = report.b_star;

    let outer = |x: f64| -> Result<f64> {
        let z = beta(eig, costs, b_star, x)?.x;
        q_g(eig, costs, x, z)
    };
    let root = bisect("recurrent entry level", outer, a_tilde, x_b2, SYSTEM_TOL)?;
    let d = root.x;
    let b = beta(eig, costs, b_star, d)?.x;

    let pd = eig.point(d)?;
    let pb = eig.point(b)?;
    let (hb, dhb) = buy_at(d, costs);
    let (hs, dhs) = sell_at(b, costs);
    let scale = |pt: &EigenPoint, h: f64, dh: f64, lower: bool| {
        let (mag, ln_den) = if lower {
            (dh.abs() + (h * pt.dlog_f).abs(), pt.ln_g + pt.ln_spread())
        } else {
            ((h * pt.dlog_g).abs() + dh.abs(), pt.ln_f + pt.ln_spread())
        };
        mag.ln() - ln_den
    };
    let qf_res = lower_green(&pd, hb, dhb)
        .relative_gap(lower_green(&pb, hs, dhs))
        .abs()
        * (lower_green(&pd, hb, dhb)
            .ln_abs
            .max(lower_green(&pb, hs, dhs).ln_abs)
            - log_add(scale(&pd, hb, dhb, true), scale(&pb, hs, dhs, true)))
        .exp();
    let qg_res = upper_green(&pd, hb, dhb)
        .relative_gap(upper_green(&pb, hs, dhs))
        .abs()
        * (upper_green(&pd, hb, dhb)
            .ln_abs
            .max(upper_green(&pb, hs, dhs).ln_abs)
            - log_add(scale(&pd, hb, dhb, false), scale(&pb, hs, dhs, false)))
        .exp();

    let spread = pd.dlog_f - pd.dlog_g;
    let coef_mid = (d.exp() - hb * pd.dlog_g) / spread * (-pd.ln_f).exp();
    let coef_above = (d.exp() - hb * pd.dlog_f) / spread * (-pd.ln_g).exp();
    let coef_below = coef_mid - ratio_over_f(eig, reward_buy(a_tilde, costs), a_tilde)?;
    let outer_scale =
        upper_green(&pd, hb, dhb).value().abs() + upper_green(&pb, hs, dhs).value().abs();
    let d_diag = RootDiagnostic {
        residual: q_g(eig, costs, d, b)?.abs() / outer_scale,
        bracket_width: root.bracket_width,
        iterations: root.iterations,
    };
    Ok(SwitchingSolution::Recurrent {
        a_tilde,
        d_tilde: d,
        b_tilde: b,
        coef_below,
        coef_mid,
        coef_above,
        diagnostics: SwitchingDiagnostics {
            a_tilde: a_diag,
            d_tilde: d_diag,
            q_f_residual: qf_res,
            q_g_residual: qg_res,
        },
    })
}

/// Classifies and solves.
pub fn solve_switching(
    eig: &Eigenfunctions,
    costs: &Costs,
) -> Result<(SwitchingSolution, CaseReport)> {
    let report = classify(eig, costs)?;
    let sol = solve_classified(eig, costs, &report)?;
    Ok((sol, report))
}

/// `[J~, J~', J~'']` at `x`: value of starting flat.
pub fn value_j_tilde_derivs(
    eig: &Eigenfunctions,
    costs: &Costs,
    sol: &SwitchingSolution,
    x: f64,
    second: bool,
) -> Result<[f64; 3]> {
    let SwitchingSolution::Recurrent {
        a_tilde,
        d_tilde,
        coef_below,
        coef_mid,
        coef_above,
        ..
    } = *sol
    else {
        return Ok([0.0; 3]);
    };
    let pt = eig.point(x)?;
    let curv = || eig.curvature(x);
    if x < a_tilde {
        let j = coef_below * pt.ln_f.exp();
        let j2 = if second { j * curv()?.0 } else { f64::NAN };
        Ok([j, j * pt.dlog_f, j2])
    } else if x <= d_tilde {
        let k = coef_mid * pt.ln_f.exp();
        let e = x.exp();
        let k2 = if second { k * curv()?.0 } else { f64::NAN };
        Ok([k - reward_buy(x, costs), k * pt.dlog_f - e, k2 - e])
    } else {
        let j = (coef_above.ln() + pt.ln_g).exp();
        let j2 = if second { j * curv()?.1 } else { f64::NAN };
        Ok([j, j * pt.dlog_g, j2])
    }
}

/// `[V~, V~', V~'']` at `x`: value of starting with one unit.
pub fn value_v_tilde_derivs(
    eig: &Eigenfunctions,
    costs: &Costs,
    sol: &SwitchingSolution,
    x: f64,
    second: bool,
) -> Result<[f64; 3]> {
    match *sol {
        SwitchingSolution::NoEntry { b_star } => {
            if x >= b_star {
                let e = x.exp();
                return Ok([reward_sell(x, costs), e, e]);
            }
            let pt = eig.point(x)?;
            let v = reward_sell(b_star, costs) * (pt.ln_f - eig.point(b_star)?.ln_f).exp();
            let v2 = if second {
                v * eig.curvature(x)?.0
            } else {
                f64::NAN
            };
            Ok([v, v * pt.dlog_f, v2])
        }
        SwitchingSolution::Recurrent {
            b_tilde,
            coef_mid,
            coef_above,
            ..
        } => {
            let pt = eig.point(x)?;
            if x < b_tilde {
                let v = coef_mid * pt.ln_f.exp();
                let v2 = if second {
                    v * eig.curvature(x)?.0
                } else {
                    f64::NAN
                };
                Ok([v, v * pt.dlog_f, v2])
            } else {
                let g = (coef_above.ln() + pt.ln_g).exp();
                let e = x.exp();
                let g2 = if second {
                    g * eig.curvature(x)?.1
                } else {
                    f64::NAN
                };
                Ok([g + reward_sell(x, costs), g * pt.dlog_g + e, g2 + e])
            }
        }
    }
}

pub fn value_j_tilde(
    eig: &Eigenfunctions,
    costs: &Costs,
    sol: &SwitchingSolution,
    x: f64,
) -> Result<f64> {
    Ok(value_j_tilde_derivs(eig, costs, sol, x, false)?[0])
}

pub fn value_v_tilde(
    eig: &Eigenfunctions,
    costs: &Costs,
    sol: &SwitchingSolution,
    x: f64,
) -> Result<f64> {
    Ok(value_v_tilde_derivs(eig, costs, sol, x, false)?[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::double_stopping;
    use crate::eigen::QuadratureConfig;
    use crate::model::ModelParams;

    fn base_case() -> (Eigenfunctions, Costs) {
        let p = ModelParams::new(0.8, 1.0, 0.2, 0.05).unwrap();
        (
            Eigenfunctions::new(p, QuadratureConfig::default()).unwrap(),
            Costs::new(0.02, 0.02).unwrap(),
        )
    }

    #[test]
    fn base_case_is_recurrent() {
        let (e, c) = base_case();
        let (sol, rep) = solve_switching(&e, &c).unwrap();
        assert_eq!(rep.case, SwitchingCase::Recurrent);
        assert_eq!(rep.integral_test_holds, Some(true));
        let SwitchingSolution::Recurrent {
            d_tilde,
            b_tilde,
            diagnostics,
            coef_below,
            ..
        } = sol
        else {
            panic!()
        };
        assert!((d_tilde - 0.8708).abs() < 1e-3, "{d_tilde}");
        assert!((b_tilde - 1.0411).abs() < 1e-3, "{b_tilde}");
        assert!(diagnostics.q_f_residual < 1e-9 && diagnostics.q_g_residual < 1e-9);
        assert!(coef_below > 0.0);
    }

    #[test]
    fn green_identities_match_quadrature() {
        let (e, c) = base_case();
        for &x in &[-2.0, 0.0, 0.5, 0.96] {
            let closed = q(&e, &c, x).unwrap();
            let (ln, sign) = q_by_quadrature(&e, &c, x).unwrap();
            assert!((sign * ln.exp() / closed - 1.0).abs() < 1e-8, "q at {x}");
            let (hb, dhb) = buy_at(x, &c);
            let closed = upper_green(&e.point(x).unwrap(), hb, dhb).value();
            let (ln, sign) = upper_buy_integral_by_quadrature(&e, &c, x).unwrap();
            assert!(
                (sign * ln.exp() / closed - 1.0).abs() < 1e-8,
                "upper at {x}"
            );
        }
    }

    #[test]
    fn beta_starts_at_exit_level_and_decreases() {
        let (e, c) = base_case();
        let b_star = double_stopping::solve_exit(&e, &c).unwrap().b_star;
        let (a, _) = solve_a_tilde(&e, &c).unwrap().unwrap();
        assert!((beta(&e, &c, b_star, a).unwrap().x - b_star).abs() < 1e-6);
        let mut prev = f64::INFINITY;
        // Far below theta the pairing moves b by less than one ulp.
        for &x in &[-8.0, -5.0, 0.0, 0.3, 0.6, 0.9] {
            let z = beta(&e, &c, b_star, x).unwrap().x;
            assert!(z > 0.96 && z <= b_star + 1e-10);
            if x >= 0.0 {
                assert!(z < prev, "beta({x}) = {z}");
            }
            prev = z;
        }
    }
}
