//! Independent checks on solved thresholds.
//!
//! * Rebuilding `V` and `J` from smallest concave majorants of the
//!   transformed rewards `H = h_s / G` and `H_hat = (V - h_b) / G`, taken as
//!   functions of `z = F / G`.
//! * Shape properties of those transforms, clause by clause, on a grid.
//! * Residuals of the variational inequalities the value functions solve.
//!
//! Transform values span thousands of orders of magnitude and are kept in
//! [`Ext`]; hull turns are decided by cross products, never by slopes.

use serde::{Deserialize, Serialize};

use crate::double_stopping::{
    value_entry_derivs, value_exit, value_exit_derivs, DoubleStoppingSolution, ExitSolution,
};
use crate::eigen::Eigenfunctions;
use crate::error::{invalid, Result};
use crate::ext::Ext;
use crate::model::{landmarks, reward_buy, reward_sell, Costs, FbRoots};
use crate::switching::{value_j_tilde_derivs, value_v_tilde_derivs, SwitchingSolution};

/// Default tolerance for scaled variational-inequality residuals.
pub const VI_TOLERANCE: f64 = 1e-6;

/// Grid cells on each side of a threshold left out of residual checks.
pub const KINK_CELLS: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct TransformGrid {
    pub x: Vec<f64>,
    /// `psi(x) = F(x) / G(x)`.
    pub z: Vec<Ext>,
    /// `h_s / G`.
    pub h: Vec<Ext>,
    /// `(V - h_b) / G`.
    pub h_hat: Vec<Ext>,
    pub ln_g: Vec<f64>,
}

impl TransformGrid {
    pub fn spacing(&self) -> f64 {
        self.x[1] - self.x[0]
    }
}

pub fn uniform_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

pub fn build_transforms(
    eig: &Eigenfunctions,
    costs: &Costs,
    exit: &ExitSolution,
    x_lo: f64,
    x_hi: f64,
    n: usize,
) -> Result<TransformGrid> {
    if !(x_lo < x_hi) {
        return Err(invalid(
            "x_lo",
            format!("must be below x_hi ({x_lo} >= {x_hi})"),
        ));
    }
    if n < 3 {
        return Err(invalid("n", "need at least 3 grid points"));
    }
    let x = uniform_grid(x_lo, x_hi, n);
    let mut g = TransformGrid {
        z: Vec::with_capacity(n),
        h: Vec::with_capacity(n),
        h_hat: Vec::with_capacity(n),
        ln_g: Vec::with_capacity(n),
        x: Vec::new(),
    };
    for &xi in &x {
        let pt = eig.point(xi)?;
        let inv_g = Ext::from_ln(1.0, -pt.ln_g);
        g.z.push(Ext::from_ln(1.0, pt.ln_psi()));
        g.h.push(Ext::new(reward_sell(xi, costs)) * inv_g);
        let gain = value_exit(eig, costs, exit, xi)? - reward_buy(xi, costs);
        g.h_hat.push(Ext::new(gain) * inv_g);
        g.ln_g.push(pt.ln_g);
    }
    g.x = x;
    Ok(g)
}

/// Smallest concave majorant on `[0, inf)` of points `(z_i, v_i)` together
/// with the origin, evaluated at every `z_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Majorant {
    pub values: Vec<Ext>,
    /// Grid indices of hull vertices, left to right (the origin excluded).
    pub vertices: Vec<usize>,
}

fn cross(o: (Ext, Ext), a: (Ext, Ext), b: (Ext, Ext)) -> Ext {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// `z` must be strictly increasing and positive.
pub fn concave_majorant(z: &[Ext], v: &[Ext]) -> Majorant {
    assert_eq!(z.len(), v.len());
    let mut top: Option<usize> = None;
    for i in 0..v.len() {
        if v[i] > Ext::ZERO && top.is_none_or(|t| v[i] > v[t]) {
            top = Some(i);
        }
    }
    let Some(top) = top else {
        // Nothing above the origin: the majorant is the zero function.
        return Majorant {
            values: vec![Ext::ZERO; z.len()],
            vertices: Vec::new(),
        };
    };
    // Hull points as (grid index or origin, z, v).
    let mut hull: Vec<(Option<usize>, Ext, Ext)> = vec![(None, Ext::ZERO, Ext::ZERO)];
    for i in 0..=top {
        let p = (z[i], v[i]);
        while hull.len() >= 2 {
            let o = hull[hull.len() - 2];
            let a = hull[hull.len() - 1];
            if cross((o.1, o.2), (a.1, a.2), p) >= Ext::ZERO {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push((Some(i), p.0, p.1));
    }
    let mut values = Vec::with_capacity(z.len());
    let mut seg = 0;
    for (i, &zi) in z.iter().enumerate() {
        if i >= top {
            values.push(v[top]);
            continue;
        }
        while seg + 1 < hull.len() - 1 && hull[seg + 1].1 <= zi {
            seg += 1;
        }
        let (_, z0, v0) = hull[seg];
        let (_, z1, v1) = hull[seg + 1];
        values.push(v0 + (v1 - v0) * ((zi - z0) / (z1 - z0)));
    }
    Majorant {
        values,
        vertices: hull.iter().filter_map(|h| h.0).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MajorantReport {
    pub compare_lo: f64,
    pub compare_hi: f64,
    pub v_max_rel_gap: f64,
    pub j_max_rel_gap: f64,
    /// Grid point where the line from the origin touches `H`.
    pub exit_touch_x: f64,
    /// `|exit_touch_x - b*|` in grid cells.
    pub exit_touch_cells: f64,
    pub entry_touch_x: f64,
    pub entry_touch_cells: f64,
    /// Grid maximizer of `H_hat`.
    pub entry_peak_x: f64,
    pub entry_peak_cells: f64,
    /// Majorant of `H` dominates `H` everywhere and equals it exactly from
    /// the touch point on.
    pub exit_majorant_shape_ok: bool,
    pub tolerance: f64,
    pub pass: bool,
}

fn rel_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// Rebuilds `V` and `J` as `G(x) W(psi(x))` and compares them with the
/// closed forms on `[compare_lo, compare_hi]`.
pub fn majorant_oracle(
    eig: &Eigenfunctions,
    costs: &Costs,
    sol: &DoubleStoppingSolution,
    grid: &TransformGrid,
    compare_lo: f64,
    compare_hi: f64,
    tolerance: f64,
) -> Result<MajorantReport> {
    let dx = grid.spacing();
    let w = concave_majorant(&grid.z, &grid.h);
    let w_hat = concave_majorant(&grid.z, &grid.h_hat);
    let exit = sol.exit();
    let mut v_gap: f64 = 0.0;
    let mut j_gap: f64 = 0.0;
    for (i, &x) in grid.x.iter().enumerate() {
        if x < compare_lo || x > compare_hi {
            continue;
        }
        let g = Ext::from_ln(1.0, grid.ln_g[i]);
        let v = (w.values[i] * g).to_f64();
        v_gap = v_gap.max(rel_gap(v, value_exit(eig, costs, &exit, x)?));
        let j = (w_hat.values[i] * g).to_f64();
        j_gap = j_gap.max(rel_gap(
            j,
            value_entry_derivs(eig, costs, sol, x, false)?[0],
        ));
    }
    let exit_touch = w.vertices.first().map_or(f64::NAN, |&i| grid.x[i]);
    let entry_touch = w_hat.vertices.first().map_or(f64::NAN, |&i| grid.x[i]);
    let entry_peak = w_hat.vertices.last().map_or(f64::NAN, |&i| grid.x[i]);

    let mut shape_ok = true;
    for i in 0..grid.x.len() {
        let (wi, hi) = (w.values[i], grid.h[i]);
        let slack = (wi - hi).to_f64_relative(hi);
        if slack < -1e-9 {
            shape_ok = false;
        }
        if grid.x[i] >= exit_touch && slack.abs() > 1e-9 {
            shape_ok = false;
        }
        if grid.x[i] < exit_touch - dx && slack <= 0.0 {
            shape_ok = false;
        }
    }
    let cells = |x: f64, target: f64| (x - target).abs() / dx;
    let report = MajorantReport {
        compare_lo,
        compare_hi,
        v_max_rel_gap: v_gap,
        j_max_rel_gap: j_gap,
        exit_touch_x: exit_touch,
        exit_touch_cells: cells(exit_touch, sol.b_star),
        entry_touch_x: entry_touch,
        entry_touch_cells: cells(entry_touch, sol.a_star),
        entry_peak_x: entry_peak,
        entry_peak_cells: cells(entry_peak, sol.d_star),
        exit_majorant_shape_ok: shape_ok,
        tolerance,
        pass: false,
    };
    let pass = v_gap <= tolerance
        && j_gap <= tolerance
        && report.exit_touch_cells <= 1.0 + 1e-9
        && report.entry_touch_cells <= 1.0 + 1e-9
        && report.entry_peak_cells <= 1.0 + 1e-9
        && shape_ok;
    Ok(MajorantReport { pass, ..report })
}

impl Ext {
    /// `self / |reference|` as an `f64`, or `self` itself when the
    /// reference is zero.
    fn to_f64_relative(self, reference: Ext) -> f64 {
        if reference.is_zero() {
            return self.to_f64();
        }
        (self / reference.abs()).to_f64()
    }
}

/// One property asserted on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClauseCheck {
    pub id: String,
    pub statement: String,
    pub passed: bool,
    /// The property is asymptotic and only a finite stand-in was checked.
    pub surrogate: bool,
    pub detail: String,
}

impl ClauseCheck {
    fn new(id: &str, statement: &str, passed: bool, detail: String) -> Self {
        Self {
            id: id.into(),
            statement: statement.into(),
            passed,
            surrogate: false,
            detail,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeReport {
    pub grid_lo: f64,
    pub grid_hi: f64,
    pub grid_points: usize,
    pub clauses: Vec<ClauseCheck>,
    pub pass: bool,
}

/// Sign of the second divided difference at interior index `i`.
fn curvature_sign(z: &[Ext], v: &[Ext], i: usize) -> f64 {
    let left = (v[i] - v[i - 1]) / (z[i] - z[i - 1]);
    let right = (v[i + 1] - v[i]) / (z[i + 1] - z[i]);
    (right - left).signum()
}

/// Checks that curvature is `sign` on every interior grid index whose `x`
/// satisfies `inside`, skipping cells near `avoid`.
fn curvature_holds(
    g: &TransformGrid,
    v: &[Ext],
    sign: f64,
    inside: impl Fn(f64) -> bool,
    avoid: &[f64],
) -> (bool, usize, Option<f64>) {
    let margin = (KINK_CELLS as f64 + 0.5) * g.spacing();
    let mut checked = 0;
    for i in 1..g.x.len() - 1 {
        let x = g.x[i];
        if !inside(x) || avoid.iter().any(|a| (x - a).abs() <= margin) {
            continue;
        }
        checked += 1;
        if curvature_sign(&g.z, v, i) != sign {
            return (false, checked, Some(x));
        }
    }
    (checked > 0, checked, None)
}

fn describe(checked: usize, first_bad: Option<f64>) -> String {
    match first_bad {
        Some(x) => format!("violated at x = {x:.6} after {checked} points"),
        None => format!("{checked} grid points"),
    }
}

/// Shape properties of `H` and `H_hat` as grid assertions.
pub fn shape_property_suite(
    eig: &Eigenfunctions,
    costs: &Costs,
    sol: &DoubleStoppingSolution,
    n: usize,
) -> Result<ShapeReport> {
    let lm = landmarks(eig.params(), costs)?;
    let FbRoots::TwoRoots { x_b1, x_b2 } = lm.fb_roots else {
        return Err(invalid(
            "costs",
            "the shape suite needs a buy region (two roots of f_b)",
        ));
    };
    let ln_cs = costs.c_s.ln();
    let b = sol.b_star;
    let lo = x_b1.min(ln_cs).min(sol.a_star) - 5.0;
    let hi = b + 3.0;
    let g = build_transforms(eig, costs, &sol.exit(), lo, hi, n)?;
    let mut clauses = Vec::new();

    // Sell transform H = h_s / G.
    let max_ln =
        g.h.iter()
            .map(|h| h.ln_abs())
            .fold(f64::NEG_INFINITY, f64::max);
    let first_ln = g.h[0].ln_abs();
    clauses.push(ClauseCheck::new(
        "sell_transform.vanishes_at_origin",
        "H(z) -> 0 as z -> 0",
        first_ln < max_ln - 30.0,
        format!("ln|H| at grid start {first_ln:.1}, grid maximum {max_ln:.1}"),
    ));
    let bad =
        g.x.iter().zip(&g.h).find(|(x, h)| {
            (**x < ln_cs && h.signum() >= 0.0) || (**x > ln_cs && h.signum() <= 0.0)
        });
    clauses.push(ClauseCheck::new(
        "sell_transform.sign",
        "H < 0 below psi(ln c_s), H > 0 above",
        bad.is_none(),
        bad.map_or("all grid points".into(), |(x, _)| {
            format!("wrong sign at x = {x:.6}")
        }),
    ));
    let bad = (1..g.x.len()).find(|&i| g.x[i - 1] > ln_cs && !(g.h[i] > g.h[i - 1]));
    clauses.push(ClauseCheck::new(
        "sell_transform.increasing",
        "H strictly increasing above psi(ln c_s)",
        bad.is_none(),
        bad.map_or("all grid steps".into(), |i| {
            format!("not increasing at x = {:.6}", g.x[i])
        }),
    ));
    {
        let tail: Vec<(Ext, Ext)> = [b + 1.0, b + 2.0, b + 3.0]
            .iter()
            .map(|&x| -> Result<(Ext, Ext)> {
                let pt = eig.point(x)?;
                Ok((
                    Ext::from_ln(1.0, pt.ln_psi()),
                    Ext::new(reward_sell(x, costs)) * Ext::from_ln(1.0, -pt.ln_g),
                ))
            })
            .collect::<Result<_>>()?;
        let s1 = ((tail[1].1 - tail[0].1) / (tail[1].0 - tail[0].0)).to_f64();
        let s2 = ((tail[2].1 - tail[1].1) / (tail[2].0 - tail[1].0)).to_f64();
        let mut c = ClauseCheck::new(
            "sell_transform.slope_vanishes",
            "H'(z) -> 0 as z -> inf (checked as positive, shrinking chord slopes at x = b*+1, b*+2, b*+3)",
            s2 > 0.0 && s2 < s1,
            format!("chord slopes {s1:.6e}, {s2:.6e}"),
        );
        c.surrogate = true;
        clauses.push(c);
    }
    let (ok1, n1, bad1) = curvature_holds(&g, &g.h, 1.0, |x| x < lm.x_s, &[lm.x_s]);
    let (ok2, n2, bad2) = curvature_holds(&g, &g.h, -1.0, |x| x > lm.x_s, &[lm.x_s]);
    clauses.push(ClauseCheck::new(
        "sell_transform.convexity",
        "H convex below psi(x_s), concave above",
        ok1 && ok2,
        format!(
            "convex side: {}; concave side: {}",
            describe(n1, bad1),
            describe(n2, bad2)
        ),
    ));

    // Entry transform H_hat = (V - h_b) / G.
    let max_ln = g
        .h_hat
        .iter()
        .map(|h| h.ln_abs())
        .fold(f64::NEG_INFINITY, f64::max);
    let first_ln = g.h_hat[0].ln_abs();
    clauses.push(ClauseCheck::new(
        "entry_transform.vanishes_at_origin",
        "H_hat(z) -> 0 as z -> 0",
        first_ln < max_ln - 30.0,
        format!("ln|H_hat| at grid start {first_ln:.1}, grid maximum {max_ln:.1}"),
    ));
    {
        // V decays only like |x|^(-r/mu) on the left, so the lower crossing
        // can sit astronomically far out; scan x = -10^(k/4) to reach it.
        let exit = sol.exit();
        let mut xs: Vec<f64> = (4..=240)
            .rev()
            .map(|k| -(10f64.powf(k as f64 / 4.0)))
            .filter(|&x| x < lo)
            .collect();
        xs.extend(g.x.iter().copied().filter(|&x| x < b));
        let mut signs = Vec::with_capacity(xs.len());
        for &x in &xs {
            signs.push((value_exit(eig, costs, &exit, x)? - reward_buy(x, costs)).signum());
        }
        let changes = signs.windows(2).filter(|w| w[0] != w[1]).count();
        let crossing = signs
            .windows(2)
            .position(|w| w[0] < 0.0 && w[1] > 0.0)
            .map(|i| xs[i]);
        let right_negative =
            g.x.iter()
                .zip(&g.h_hat)
                .all(|(x, h)| *x < b || h.signum() < 0.0);
        let mut c = ClauseCheck::new(
            "entry_transform.negative_ends",
            "H_hat < 0 on (0, psi(b_lower)) and on [psi(b*), inf) for some b_lower < b*",
            signs[0] < 0.0 && changes <= 2 && right_negative,
            format!(
                "left sign change near x = {}, sign changes below b*: {changes}, negative from b* on: {right_negative}",
                crossing.map_or("none".into(), |x| format!("{x:.3e}"))
            ),
        );
        c.surrogate = true;
        clauses.push(c);
    }
    let bad = (1..g.x.len()).find(|&i| g.x[i - 1] >= b && !(g.h_hat[i] < g.h_hat[i - 1]));
    clauses.push(ClauseCheck::new(
        "entry_transform.decreasing_beyond_exit",
        "H_hat strictly decreasing on [psi(b*), inf)",
        bad.is_none(),
        bad.map_or("all grid steps".into(), |i| {
            format!("not decreasing at x = {:.6}", g.x[i])
        }),
    ));
    let avoid = [x_b1, x_b2];
    let (ok1, n1, bad1) = curvature_holds(&g, &g.h_hat, 1.0, |x| x < x_b1 || x > x_b2, &avoid);
    let (ok2, n2, bad2) = curvature_holds(&g, &g.h_hat, -1.0, |x| x > x_b1 && x < x_b2, &avoid);
    clauses.push(ClauseCheck::new(
        "entry_transform.convexity",
        "H_hat convex outside (psi(x_b1), psi(x_b2)), concave inside",
        ok1 && ok2,
        format!(
            "convex parts: {}; concave part: {}",
            describe(n1, bad1),
            describe(n2, bad2)
        ),
    ));
    let mut peak = 0;
    for i in 1..g.h_hat.len() {
        if g.h_hat[i] > g.h_hat[peak] {
            peak = i;
        }
    }
    clauses.push(ClauseCheck::new(
        "entry_transform.peak_location",
        "argmax H_hat lies in (psi(x_b1), psi(x_b2))",
        g.x[peak] > x_b1 && g.x[peak] < x_b2,
        format!("grid argmax at x = {:.6}", g.x[peak]),
    ));
    clauses.push(ClauseCheck::new(
        "buy_roots.ordering",
        "x_b1 < x* < x_b2 < x_s",
        x_b1 < lm.x_star && lm.x_star < x_b2 && x_b2 < lm.x_s,
        format!("{x_b1:.6} < {:.6} < {x_b2:.6} < {:.6}", lm.x_star, lm.x_s),
    ));

    let pass = clauses.iter().all(|c| c.passed);
    Ok(ShapeReport {
        grid_lo: lo,
        grid_hi: hi,
        grid_points: n,
        clauses,
        pass,
    })
}

/// Continuity of a value function and its slope across one threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KinkCheck {
    pub label: String,
    pub x: f64,
    pub value_jump: f64,
    pub slope_jump: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub grid: Vec<f64>,
    /// `min{(r - L) J, J - (V - h_b)} / e^x`.
    pub vi_j_residuals: Vec<f64>,
    /// `min{(r - L) V, V - (J + h_s)} / e^x` (with `J = 0` after the one
    /// sale in the single-round-trip problem).
    pub vi_v_residuals: Vec<f64>,
    /// Points left out as neighbours of a threshold.
    pub excluded: Vec<bool>,
    /// Most negative residual over the checked points.
    pub worst: f64,
    pub worst_x: f64,
    pub max_positive: f64,
    pub tolerance: f64,
    pub kinks: Vec<KinkCheck>,
    pub identities: Vec<ClauseCheck>,
    pub pass: bool,
}

type Derivs<'a> = Box<dyn Fn(f64, bool) -> Result<[f64; 3]> + 'a>;

fn generator_gap(eig: &Eigenfunctions, x: f64, d: [f64; 3]) -> f64 {
    let p = eig.params();
    p.r * d[0] - 0.5 * p.sigma * p.sigma * d[2] - p.mu * (p.theta - x) * d[1]
}

struct ViProblem<'a> {
    flat: Derivs<'a>,
    held: Derivs<'a>,
    /// The held obstacle includes the flat value (repeated trading).
    recurrent: bool,
    kinks: Vec<(String, f64, bool)>,
}

fn vi_report(
    eig: &Eigenfunctions,
    costs: &Costs,
    problem: ViProblem,
    grid: &[f64],
    tolerance: f64,
    identities: Vec<ClauseCheck>,
) -> Result<ResidualReport> {
    if grid.len() < 2 {
        return Err(invalid("grid", "need at least 2 points"));
    }
    let dx = (grid[grid.len() - 1] - grid[0]) / (grid.len() - 1) as f64;
    let margin = (KINK_CELLS as f64 + 0.5) * dx;
    let mut report = ResidualReport {
        grid: grid.to_vec(),
        vi_j_residuals: Vec::with_capacity(grid.len()),
        vi_v_residuals: Vec::with_capacity(grid.len()),
        excluded: Vec::with_capacity(grid.len()),
        worst: f64::INFINITY,
        worst_x: f64::NAN,
        max_positive: 0.0,
        tolerance,
        kinks: Vec::new(),
        identities,
        pass: false,
    };
    for &x in grid {
        let skip = problem
            .kinks
            .iter()
            .any(|(_, k, _)| (x - k).abs() <= margin);
        let j = (problem.flat)(x, true)?;
        let v = (problem.held)(x, true)?;
        let scale = x.exp();
        let rj = generator_gap(eig, x, j).min(j[0] - (v[0] - reward_buy(x, costs))) / scale;
        let after_sale = if problem.recurrent { j[0] } else { 0.0 };
        let rv = generator_gap(eig, x, v).min(v[0] - (after_sale + reward_sell(x, costs))) / scale;
        report.vi_j_residuals.push(rj);
        report.vi_v_residuals.push(rv);
        report.excluded.push(skip);
        if skip {
            continue;
        }
        for r in [rj, rv] {
            if r < report.worst {
                report.worst = r;
                report.worst_x = x;
            }
            report.max_positive = report.max_positive.max(r);
        }
    }
    let eps = 1e-9;
    for (label, k, held) in &problem.kinks {
        let f = if *held { &problem.held } else { &problem.flat };
        let l = f(k - eps, false)?;
        let r = f(k + eps, false)?;
        let scale = k.exp();
        let value_jump = (l[0] - r[0]).abs() / scale;
        let slope_jump = (l[1] - r[1]).abs() / scale;
        report.kinks.push(KinkCheck {
            label: label.clone(),
            x: *k,
            value_jump,
            slope_jump,
            passed: value_jump <= tolerance && slope_jump <= tolerance,
        });
    }
    report.pass = report.worst >= -tolerance
        && report.max_positive <= tolerance
        && report.kinks.iter().all(|k| k.passed)
        && report.identities.iter().all(|c| c.passed);
    Ok(report)
}

/// Residuals of the switching pair `(J~, V~)`.
pub fn vi_residuals(
    eig: &Eigenfunctions,
    costs: &Costs,
    sol: &SwitchingSolution,
    grid: &[f64],
    tolerance: f64,
) -> Result<ResidualReport> {
    let flat: Derivs = Box::new(move |x, s| value_j_tilde_derivs(eig, costs, sol, x, s));
    let held: Derivs = Box::new(move |x, s| value_v_tilde_derivs(eig, costs, sol, x, s));
    let exit = sol.exit_level();
    let mut kinks = vec![("held value at exit level".to_string(), exit, true)];
    let mut identities = Vec::new();
    if let Some((a, d)) = sol.entry_interval() {
        kinks.push(("flat value at lowest entry level".into(), a, false));
        kinks.push(("flat value at highest entry level".into(), d, false));
    } else {
        let nonzero = grid
            .iter()
            .map(|&x| value_j_tilde_derivs(eig, costs, sol, x, true))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .filter(|d| d.iter().any(|v| *v != 0.0))
            .count();
        identities.push(ClauseCheck::new(
            "flat_value_identically_zero",
            "J~ = 0 on the whole grid",
            nonzero == 0,
            format!("{nonzero} nonzero grid points"),
        ));
    }
    let mut worst: f64 = 0.0;
    for &x in grid.iter().filter(|&&x| x >= exit) {
        let v = value_v_tilde_derivs(eig, costs, sol, x, false)?[0];
        let j = value_j_tilde_derivs(eig, costs, sol, x, false)?[0];
        worst = worst.max((v - j - reward_sell(x, costs)).abs() / x.exp());
    }
    identities.push(ClauseCheck::new(
        "held_equals_flat_plus_sale_above_exit",
        "V~ - (J~ + h_s) = 0 at and above the exit level",
        worst <= 1e-12,
        format!("largest scaled gap {worst:.3e}"),
    ));
    vi_report(
        eig,
        costs,
        ViProblem {
            flat,
            held,
            recurrent: true,
            kinks,
        },
        grid,
        tolerance,
        identities,
    )
}

/// Residuals of the single-round-trip pair `(J, V)`.
pub fn vi_residuals_double(
    eig: &Eigenfunctions,
    costs: &Costs,
    sol: &DoubleStoppingSolution,
    grid: &[f64],
    tolerance: f64,
) -> Result<ResidualReport> {
    let exit = sol.exit();
    let flat: Derivs = Box::new(move |x, s| value_entry_derivs(eig, costs, sol, x, s));
    let held: Derivs = Box::new(move |x, s| value_exit_derivs(eig, costs, &exit, x, s));
    let kinks = vec![
        ("held value at exit level".to_string(), sol.b_star, true),
        ("flat value at lowest entry level".into(), sol.a_star, false),
        (
            "flat value at highest entry level".into(),
            sol.d_star,
            false,
        ),
    ];
    vi_report(
        eig,
        costs,
        ViProblem {
            flat,
            held,
            recurrent: false,
            kinks,
        },
        grid,
        tolerance,
        Vec::new(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::double_stopping;
    use crate::eigen::QuadratureConfig;
    use crate::model::ModelParams;
    use crate::switching::solve_switching;

    fn base_case() -> (Eigenfunctions, Costs) {
        let p = ModelParams::new(0.8, 1.0, 0.2, 0.05).unwrap();
        (
            Eigenfunctions::new(p, QuadratureConfig::default()).unwrap(),
            Costs::new(0.02, 0.02).unwrap(),
        )
    }

    #[test]
    fn majorant_of_simple_points() {
        // Convex bump at the start, then a peak and a decline.
        let z: Vec<Ext> = [1.0, 2.0, 3.0, 4.0, 5.0]
            .iter()
            .map(|&v| Ext::new(v))
            .collect();
        let v: Vec<Ext> = [-1.0, 1.0, 3.5, 4.0, 2.0]
            .iter()
            .map(|&v| Ext::new(v))
            .collect();
        let m = concave_majorant(&z, &v);
        let got: Vec<f64> = m.values.iter().map(|e| e.to_f64()).collect();
        // Origin to (3, 3.5) dominates (2, 1); then (4, 4); flat after the peak.
        let want = [3.5 / 3.0, 7.0 / 3.0, 3.5, 4.0, 4.0];
        for (g, w) in got.iter().zip(want) {
            assert!((g - w).abs() < 1e-14, "{got:?}");
        }
        assert_eq!(m.vertices, vec![2, 3]);
    }

    #[test]
    fn base_case_residuals_small_and_perturbation_detected() {
        let (e, c) = base_case();
        let (sol, _) = solve_switching(&e, &c).unwrap();
        let grid = uniform_grid(-2.0, 4.0, 600);
        let rep = vi_residuals(&e, &c, &sol, &grid, VI_TOLERANCE).unwrap();
        assert!(
            rep.pass,
            "worst {} at {}, max {}",
            rep.worst, rep.worst_x, rep.max_positive
        );
        let bad = sol
            .with_exit_level(&e, &c, sol.exit_level() + 0.05)
            .unwrap();
        let rep = vi_residuals(&e, &c, &bad, &grid, VI_TOLERANCE).unwrap();
        assert!(
            !rep.pass && rep.worst < -VI_TOLERANCE,
            "{} {} {:?}",
            rep.worst,
            rep.worst_x,
            rep.kinks
        );
        assert!(
            (rep.worst_x - sol.exit_level()).abs() < 0.1,
            "{}",
            rep.worst_x
        );
    }

    #[test]
    fn double_stopping_residuals_small() {
        let (e, c) = base_case();
        let ds = double_stopping::solve(&e, &c).unwrap();
        let rep =
            vi_residuals_double(&e, &c, &ds, &uniform_grid(-2.0, 4.0, 600), VI_TOLERANCE).unwrap();
        assert!(
            rep.pass,
            "worst {} at {}, max {}",
            rep.worst, rep.worst_x, rep.max_positive
        );
    }

    #[test]
    fn majorant_rebuilds_base_case_values() {
        let (e, c) = base_case();
        let ds = double_stopping::solve(&e, &c).unwrap();
        let grid = build_transforms(&e, &c, &ds.exit(), -12.0, ds.b_star + 3.0, 4000).unwrap();
        let rep = majorant_oracle(&e, &c, &ds, &grid, -1.0, ds.b_star + 1.0, 1e-4).unwrap();
        assert!(rep.pass, "{rep:?}");
    }

    #[test]
    fn base_case_shape_clauses_hold() {
        let (e, c) = base_case();
        let ds = double_stopping::solve(&e, &c).unwrap();
        let rep = shape_property_suite(&e, &c, &ds, 2000).unwrap();
        for cl in &rep.clauses {
            assert!(cl.passed, "{cl:?}");
        }
    }

    #[test]
    fn no_entry_reports_zero_flat_value() {
        let (e, _) = base_case();
        let c = Costs::new(20.0, 0.02).unwrap();
        let (sol, _) = solve_switching(&e, &c).unwrap();
        assert!(sol.entry_interval().is_none());
        let rep = vi_residuals(&e, &c, &sol, &uniform_grid(-2.0, 4.0, 600), VI_TOLERANCE).unwrap();
        assert!(rep.pass, "worst {} at {}", rep.worst, rep.worst_x);
        assert!(rep
            .identities
            .iter()
            .any(|c| c.id == "flat_value_identically_zero" && c.passed));
    }
}
