//! One round trip: enter once, exit once.
//!
//! The exit level `b*` maximizes `h_s / F`; the exit value is
//! `V = h_s(b*) F / F(b*)` below `b*` and `h_s` above. The entry region is
//! `[a*, d*]`, where `d*` maximizes `(V - h_b) / G` and `a*` maximizes
//! `(V - h_b) / F` to the left of it. Every equation is divided through by
//! `F` or `G` so only log-derivatives and log-ratios of eigenfunctions appear.

use serde::{Deserialize, Serialize};

use crate::eigen::Eigenfunctions;
use crate::error::{Error, Result};
use crate::model::{landmarks, reward_buy, reward_sell, Costs, FbRoots};
use crate::roots::{bisect, expand_bracket, Root, ROOT_TOL};

/// How well a threshold was pinned down.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RootDiagnostic {
    /// Defining equation at the returned root, scaled to be dimensionless.
    pub residual: f64,
    pub bracket_width: f64,
    pub iterations: usize,
}

impl RootDiagnostic {
    fn new(root: &Root, residual: f64) -> Self {
        Self {
            residual,
            bracket_width: root.bracket_width,
            iterations: root.iterations,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExitSolution {
    pub b_star: f64,
    pub diagnostic: RootDiagnostic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DoubleStoppingSolution {
    pub b_star: f64,
    pub a_star: f64,
    pub d_star: f64,
    /// `J = coef_below * F` on `(-inf, a*)`.
    pub coef_below: f64,
    /// `J = coef_above * G` on `(d*, inf)`.
    pub coef_above: f64,
    pub diagnostics: DoubleStoppingDiagnostics,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DoubleStoppingDiagnostics {
    pub b_star: RootDiagnostic,
    pub a_star: RootDiagnostic,
    pub d_star: RootDiagnostic,
}

impl DoubleStoppingSolution {
    pub fn exit(&self) -> ExitSolution {
        ExitSolution {
            b_star: self.b_star,
            diagnostic: self.diagnostics.b_star,
        }
    }
}

/// `1 - h_s(b) (F'/F)(b) e^-b`: the exit equation scaled by `e^b F(b)`.
fn exit_equation(eig: &Eigenfunctions, costs: &Costs, b: f64) -> Result<f64> {
    let pt = eig.point(b)?;
    Ok(1.0 - reward_sell(b, costs) * pt.dlog_f * (-b).exp())
}

/// Solves `e^b F(b) = (e^b - c_s) F'(b)` for the optimal exit level.
pub fn solve_exit(eig: &Eigenfunctions, costs: &Costs) -> Result<ExitSolution> {
    costs.validate()?;
    let lm = landmarks(eig.params(), costs)?;
    // h_s / F increases up to b*, which lies above both x_s and ln c_s.
    let start = lm.x_s.max(costs.c_s.ln());
    let f = |b: f64| exit_equation(eig, costs, b);
    let (lo, hi) = expand_bracket("exit level bracket", f, start, 0.25, 1.0)?;
    let root = bisect("exit level", f, lo, hi, ROOT_TOL)?;
    let residual = f(root.x)?.abs();
    Ok(ExitSolution {
        b_star: root.x,
        diagnostic: RootDiagnostic::new(&root, residual),
    })
}

/// `V(x)`, the value of holding one unit and selling optimally.
pub fn value_exit(eig: &Eigenfunctions, costs: &Costs, exit: &ExitSolution, x: f64) -> Result<f64> {
    Ok(value_exit_derivs(eig, costs, exit, x, false)?[0])
}

/// `[V, V', V'']` at `x`; the second derivative is only computed when asked.
pub fn value_exit_derivs(
    eig: &Eigenfunctions,
    costs: &Costs,
    exit: &ExitSolution,
    x: f64,
    second: bool,
) -> Result<[f64; 3]> {
    let b = exit.b_star;
    if x >= b {
        return Ok([reward_sell(x, costs), x.exp(), x.exp()]);
    }
    let pt = eig.point(x)?;
    let v = reward_sell(b, costs) * (pt.ln_f - eig.point(b)?.ln_f).exp();
    let v2 = if second {
        v * eig.curvature(x)?.0
    } else {
        f64::NAN
    };
    Ok([v, v * pt.dlog_f, v2])
}

/// `V - h_b`: the net gain from entering at `x`.
fn entry_gain(eig: &Eigenfunctions, costs: &Costs, exit: &ExitSolution, x: f64) -> Result<f64> {
    Ok(value_exit(eig, costs, exit, x)? - reward_buy(x, costs))
}

/// `d/dx [(V - h_b)/U] * U` for `U` with log-derivative `dlog_u`, plus a
/// magnitude for scaling the residual.
fn tangency(
    eig: &Eigenfunctions,
    costs: &Costs,
    exit: &ExitSolution,
    x: f64,
    dlog_u: f64,
) -> Result<(f64, f64)> {
    let [v, dv, _] = value_exit_derivs(eig, costs, exit, x, false)?;
    let gain = v - reward_buy(x, costs);
    let slope = dv - x.exp();
    Ok((
        slope - dlog_u * gain,
        slope.abs() + (dlog_u * gain).abs() + x.exp(),
    ))
}

fn sup_gain_scan(eig: &Eigenfunctions, costs: &Costs, exit: &ExitSolution) -> Result<f64> {
    let theta = eig.params().theta;
    let lo = (theta - 20.0).min(costs.c_b.ln() - 5.0);
    let n = 2000;
    let mut best = f64::NEG_INFINITY;
    for i in 0..=n {
        let x = lo + (exit.b_star + 1.0 - lo) * i as f64 / n as f64;
        best = best.max(entry_gain(eig, costs, exit, x)?);
    }
    Ok(best)
}

/// Solves the entry interval `[a*, d*]` given the exit level.
pub fn solve_entry(
    eig: &Eigenfunctions,
    costs: &Costs,
    exit: &ExitSolution,
) -> Result<DoubleStoppingSolution> {
    let lm = landmarks(eig.params(), costs)?;
    // A concave stretch of the transformed entry gain needs f_b > 0 somewhere.
    let FbRoots::TwoRoots { x_b1, x_b2 } = lm.fb_roots else {
        return Err(Error::TrivialProblem {
            sup_gain: sup_gain_scan(eig, costs, exit)?,
        });
    };

    let d_eq = |x: f64| -> Result<f64> {
        let g = eig.point(x)?.dlog_g;
        Ok(tangency(eig, costs, exit, x, g)?.0)
    };
    let (at_lo, at_hi) = (d_eq(x_b1)?, d_eq(x_b2)?);
    if !(at_lo > 0.0 && at_hi < 0.0) {
        let sup_gain = sup_gain_scan(eig, costs, exit)?;
        if sup_gain <= 0.0 {
            return Err(Error::TrivialProblem { sup_gain });
        }
        return Err(Error::BracketFailure {
            what: "entry upper level",
            start: x_b1,
            last: x_b2,
        });
    }
    let d_root = bisect("entry upper level", d_eq, x_b1, x_b2, ROOT_TOL)?;
    let d_star = d_root.x;
    let gain_d = entry_gain(eig, costs, exit, d_star)?;
    if gain_d <= 0.0 {
        return Err(Error::TrivialProblem { sup_gain: gain_d });
    }
    let d_pt = eig.point(d_star)?;
    let (res, scale) = tangency(eig, costs, exit, d_star, d_pt.dlog_g)?;
    let d_diag = RootDiagnostic::new(&d_root, res.abs() / scale);

    let a_eq = |x: f64| -> Result<f64> {
        let f = eig.point(x)?.dlog_f;
        Ok(tangency(eig, costs, exit, x, f)?.0)
    };
    let a_root = bisect("entry lower level", a_eq, x_b1, d_star, ROOT_TOL)?;
    let a_star = a_root.x;
    let a_pt = eig.point(a_star)?;
    let (res, scale) = tangency(eig, costs, exit, a_star, a_pt.dlog_f)?;
    let a_diag = RootDiagnostic::new(&a_root, res.abs() / scale);
    let gain_a = entry_gain(eig, costs, exit, a_star)?;

    Ok(DoubleStoppingSolution {
        b_star: exit.b_star,
        a_star,
        d_star,
        coef_below: gain_a * (-a_pt.ln_f).exp(),
        coef_above: gain_d * (-d_pt.ln_g).exp(),
        diagnostics: DoubleStoppingDiagnostics {
            b_star: exit.diagnostic,
            a_star: a_diag,
            d_star: d_diag,
        },
    })
}

/// Exit level first, then the entry interval.
pub fn solve(eig: &Eigenfunctions, costs: &Costs) -> Result<DoubleStoppingSolution> {
    let exit = solve_exit(eig, costs)?;
    solve_entry(eig, costs, &exit)
}

/// `J(x)`, the value of a flat position that may buy once and later sell.
pub fn value_entry(
    eig: &Eigenfunctions,
    costs: &Costs,
    sol: &DoubleStoppingSolution,
    x: f64,
) -> Result<f64> {
    Ok(value_entry_derivs(eig, costs, sol, x, false)?[0])
}

/// `[J, J', J'']` at `x`.
pub fn value_entry_derivs(
    eig: &Eigenfunctions,
    costs: &Costs,
    sol: &DoubleStoppingSolution,
    x: f64,
    second: bool,
) -> Result<[f64; 3]> {
    let exit = sol.exit();
    if x >= sol.a_star && x <= sol.d_star {
        let [v, dv, d2v] = value_exit_derivs(eig, costs, &exit, x, second)?;
        let e = x.exp();
        return Ok([v - reward_buy(x, costs), dv - e, d2v - e]);
    }
    let pt = eig.point(x)?;
    let (anchor, below) = if x < sol.a_star {
        (sol.a_star, true)
    } else {
        (sol.d_star, false)
    };
    let gain = entry_gain(eig, costs, &exit, anchor)?;
    let apt = eig.point(anchor)?;
    let (j, dlog) = if below {
        (gain * (pt.ln_f - apt.ln_f).exp(), pt.dlog_f)
    } else {
        (gain * (pt.ln_g - apt.ln_g).exp(), pt.dlog_g)
    };
    let j2 = if second {
        let (cf, cg) = eig.curvature(x)?;
        j * if below { cf } else { cg }
    } else {
        f64::NAN
    };
    Ok([j, j * dlog, j2])
}

/// Value at `x` of buying on the first visit to `[entry_lo, entry_hi]` and
/// selling at `exit`, whether or not those levels are optimal.
pub fn round_trip_value(
    eig: &Eigenfunctions,
    costs: &Costs,
    entry_lo: f64,
    entry_hi: f64,
    exit: f64,
    x: f64,
) -> Result<f64> {
    let held = |y: f64| -> Result<f64> {
        if y >= exit {
            return Ok(reward_sell(y, costs));
        }
        Ok(reward_sell(exit, costs) * (eig.point(y)?.ln_f - eig.point(exit)?.ln_f).exp())
    };
    let gain = |y: f64| -> Result<f64> { Ok(held(y)? - reward_buy(y, costs)) };
    if x >= entry_lo && x <= entry_hi {
        return gain(x);
    }
    let pt = eig.point(x)?;
    if x < entry_lo {
        Ok(gain(entry_lo)? * (pt.ln_f - eig.point(entry_lo)?.ln_f).exp())
    } else {
        Ok(gain(entry_hi)? * (pt.ln_g - eig.point(entry_hi)?.ln_g).exp())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
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
    fn base_case_levels() {
        let (e, c) = base_case();
        let s = solve(&e, &c).unwrap();
        assert!((s.b_star - 1.1310).abs() < 1e-3, "{}", s.b_star);
        // Reference from an independent 40-digit parabolic-cylinder evaluation.
        assert!((s.d_star - 0.72472179).abs() < 1e-7, "{}", s.d_star);
        assert!((s.a_star + 8.9760).abs() < 5e-3, "{}", s.a_star);
        assert!((s.a_star + 8.979089).abs() < 1e-5, "{}", s.a_star);
        assert!(s.diagnostics.b_star.residual < 1e-10);
        assert!(s.diagnostics.a_star.residual < 1e-10);
        assert!(s.diagnostics.d_star.residual < 1e-10);
        assert!(s.coef_below > 0.0 && s.coef_above > 0.0);
    }

    #[test]
    fn exit_level_is_grid_argmax_of_sell_ratio() {
        let (e, c) = base_case();
        let exit = solve_exit(&e, &c).unwrap();
        let lm = landmarks(e.params(), &c).unwrap();
        let mut best = (f64::NEG_INFINITY, 0.0);
        let mut x = lm.x_s;
        while x < lm.x_s + 1.0 {
            let v = reward_sell(x, &c).ln() - e.point(x).unwrap().ln_f;
            if v > best.0 {
                best = (v, x);
            }
            x += 1e-4;
        }
        assert!((best.1 - exit.b_star).abs() <= 1e-4);
    }

    #[test]
    fn value_functions_paste_smoothly() {
        let (e, c) = base_case();
        let s = solve(&e, &c).unwrap();
        let h = 1e-6;
        let ex = s.exit();
        let slope = |f: &dyn Fn(f64) -> f64, x: f64, side: f64| side * (f(x + side * h) - f(x)) / h;
        let v = |x: f64| value_exit(&e, &c, &ex, x).unwrap();
        let (l, r) = (slope(&v, s.b_star, -1.0), slope(&v, s.b_star, 1.0));
        assert!((l / r - 1.0).abs() < 1e-5, "{l} {r}");
        let j = |x: f64| value_entry(&e, &c, &s, x).unwrap();
        for k in [s.a_star, s.d_star] {
            let (l, r) = (slope(&j, k, -1.0), slope(&j, k, 1.0));
            assert!((l - r).abs() <= 1e-5 * l.abs().max(1e-3), "at {k}: {l} {r}");
        }
    }

    #[test]
    fn optimal_levels_beat_nearby_levels() {
        let (e, c) = base_case();
        let s = solve(&e, &c).unwrap();
        let best = round_trip_value(&e, &c, s.a_star, s.d_star, s.b_star, 1.0).unwrap();
        assert!((best - value_entry(&e, &c, &s, 1.0).unwrap()).abs() < 1e-12);
        for (dd, db) in [(0.02, 0.0), (-0.02, 0.0), (0.0, 0.02), (0.0, -0.02)] {
            let v = round_trip_value(&e, &c, s.a_star, s.d_star + dd, s.b_star + db, 1.0).unwrap();
            assert!(v < best);
        }
    }

    #[test]
    fn large_buy_cost_is_trivial() {
        let (e, _) = base_case();
        let c = Costs::new(40.0, 0.02).unwrap();
        assert!(matches!(solve(&e, &c), Err(Error::TrivialProblem { .. })));
    }
}
