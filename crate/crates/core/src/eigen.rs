//! Increasing and decreasing solutions `F`, `G` of `(L - r) u = 0` for the
//! OU generator `L = sigma^2/2 d^2/dx^2 + mu (theta - x) d/dx`.
//!
//! Both are moments of one integral. With `k = sqrt(2 mu / sigma^2)`,
//! `nu = r / mu` and `y = k (x - theta)`,
//!
//! ```text
//! I_n(y) = int_0^inf u^(nu + n - 1) exp(y u - u^2 / 2) du
//! F^(n)(x) = k^n I_n(y),    G^(n)(x) = (-k)^n I_n(-y)
//! ```
//!
//! `G` overflows `f64` a few units left of `theta` (roughly `exp(y^2/2)`) and
//! `F` does the same on the right, so moments are carried as logarithms and
//! every consumer works with log-values and log-derivative ratios such as
//! `F'/F`. Derivatives come from differentiated integrands, never from
//! finite differences.

use std::cell::RefCell;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::quadrature::integrate_breaks;
pub use crate::quadrature::QuadratureConfig;

/// Beyond this `|y|` the moments switch to rescaled integrals.
const FAR_FIELD: f64 = 40.0;

/// A single evaluation of `F`, `G` or one of their first two derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenEval {
    /// Signed value; may be `0` or `inf` when out of `f64` range.
    pub value: f64,
    /// `ln |value|`, always finite.
    pub log_value: f64,
    pub order: u8,
}

/// `F`, `G` and their log-derivatives at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenPoint {
    pub x: f64,
    pub ln_f: f64,
    /// `F'(x) / F(x) > 0`.
    pub dlog_f: f64,
    pub ln_g: f64,
    /// `G'(x) / G(x) < 0`.
    pub dlog_g: f64,
}

impl EigenPoint {
    pub fn ln_psi(&self) -> f64 {
        self.ln_f - self.ln_g
    }

    /// `ln(F'/F - G'/G)`; the Wronskian is `F G (F'/F - G'/G)`.
    pub fn ln_spread(&self) -> f64 {
        (self.dlog_f - self.dlog_g).ln()
    }

    pub fn ln_wronskian(&self) -> f64 {
        self.ln_f + self.ln_g + self.ln_spread()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Route {
    Substituted,
    Split,
}

/// Evaluator for `F`, `G` and derived objects under one parameter set.
///
/// Holds a per-run memo of moment evaluations keyed by the exact bits of the
/// argument. The memo uses interior mutability without locking, so an
/// evaluator is confined to one thread; parallel work builds one evaluator
/// per worker.
#[derive(Debug, Clone)]
pub struct Eigenfunctions {
    params: ModelParams,
    quad: QuadratureConfig,
    k: f64,
    nu: f64,
    memo: RefCell<HashMap<(u64, u8, Route), f64>>,
}

impl Eigenfunctions {
    pub fn new(params: ModelParams, quad: QuadratureConfig) -> Result<Self> {
        params.validate()?;
        quad.validate()?;
        Ok(Self {
            k: (2.0 * params.mu).sqrt() / params.sigma,
            nu: params.r / params.mu,
            params,
            quad,
            memo: RefCell::new(HashMap::new()),
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn quadrature(&self) -> &QuadratureConfig {
        &self.quad
    }

    /// `sqrt(2 mu / sigma^2)`: the log-price scale inside the integrals.
    pub fn scale(&self) -> f64 {
        self.k
    }

    pub fn memo_len(&self) -> usize {
        self.memo.borrow().len()
    }

    fn y(&self, x: f64) -> f64 {
        self.k * (x - self.params.theta)
    }

    /// `ln I_n(y)` through the singularity-removing substitution
    /// `u = v^(1/(nu + n))`, which turns `u^(nu+n-1) du` into `dv / (nu+n)`.
    pub fn log_moment(&self, y: f64, n: u8) -> Result<f64> {
        self.memoized(y, n, Route::Substituted, |s| s.log_moment_substituted(y, n))
    }

    /// `ln I_n(y)` through a split of the raw integral: a Hermite series on
    /// `[0, u_s]` handles the endpoint singularity analytically and
    /// Gauss-Kronrod covers the rest. Independent of [`Self::log_moment`];
    /// kept as a cross-check.
    pub fn log_moment_split(&self, y: f64, n: u8) -> Result<f64> {
        self.memoized(y, n, Route::Split, |s| s.log_moment_split_uncached(y, n))
    }

    fn memoized(
        &self,
        y: f64,
        n: u8,
        route: Route,
        compute: impl FnOnce(&Self) -> Result<f64>,
    ) -> Result<f64> {
        let key = (y.to_bits(), n, route);
        if let Some(v) = self.memo.borrow().get(&key) {
            return Ok(*v);
        }
        let v = compute(self)?;
        self.memo.borrow_mut().insert(key, v);
        Ok(v)
    }

    fn log_moment_substituted(&self, y: f64, n: u8) -> Result<f64> {
        let p = self.nu + n as f64;
        let c = self.quad.tail_cutoff;
        if y < -FAR_FIELD {
            return self.log_moment_far_left(-y, p);
        }
        if y > FAR_FIELD.max(2.0 * (2.0 * c).sqrt()) {
            return self.log_moment_far_right(y, p);
        }
        // exp(y u - u^2/2) peaks at u = max(y, 0).
        let yp = y.max(0.0);
        let peak = 0.5 * yp * yp;
        let u_hi = if y > 0.0 {
            y + (2.0 * c).sqrt()
        } else {
            y + (y * y + 2.0 * c).sqrt()
        };
        let u_lo = (y - (2.0 * c).sqrt()).max(0.0);
        let to_v = |u: f64| if u > 0.0 { (p * u.ln()).exp() } else { 0.0 };
        let mut breaks = vec![to_v(u_lo)];
        if yp > u_lo {
            breaks.push(to_v(yp));
        } else {
            let knee = 1.0 / (1.0 + y.abs());
            if knee < u_hi {
                breaks.push(to_v(knee));
            }
        }
        breaks.push(to_v(u_hi));
        let inv_p = 1.0 / p;
        let integrand = |v: f64| {
            if v <= 0.0 {
                return (-peak).exp();
            }
            let u = (v.ln() * inv_p).exp();
            // g(u) - peak, written so the large-y cancellation is exact.
            let d = u - yp;
            (-0.5 * d * d + (y - yp) * u).exp()
        };
        let r = integrate_breaks(integrand, &breaks, &self.quad)?;
        Ok(peak + r.value.ln() - p.ln())
    }

    /// `I` at `y = -s`: with `t = s u` the integral is
    /// `s^(-p) int t^(p-1) exp(-t - t^2 / (2 s^2)) dt`, then `v = t^p`.
    fn log_moment_far_left(&self, s: f64, p: f64) -> Result<f64> {
        let c = self.quad.tail_cutoff;
        let q = 0.5 / (s * s);
        // Root of t + q t^2 = c, in cancellation-free form.
        let t_hi = 2.0 * c / (1.0 + (1.0 + 4.0 * q * c).sqrt());
        let inv_p = 1.0 / p;
        let to_v = |t: f64| (p * t.ln()).exp();
        let mut breaks = vec![0.0];
        if 1.0 < t_hi {
            breaks.push(1.0);
        }
        breaks.push(to_v(t_hi));
        let integrand = |v: f64| {
            if v <= 0.0 {
                return 1.0;
            }
            let t = (v.ln() * inv_p).exp();
            (-t - q * t * t).exp()
        };
        let r = integrate_breaks(integrand, &breaks, &self.quad)?;
        Ok(r.value.ln() - p.ln() - p * s.ln())
    }

    /// `I` at large positive `y`: with `u = y + t` the integrand is
    /// `y^(p-1) exp(y^2/2) (1 + t/y)^(p-1) exp(-t^2/2)`, smooth around `t = 0`.
    fn log_moment_far_right(&self, y: f64, p: f64) -> Result<f64> {
        let w = (2.0 * self.quad.tail_cutoff).sqrt();
        let integrand = |t: f64| ((p - 1.0) * (t / y).ln_1p() - 0.5 * t * t).exp();
        let r = integrate_breaks(integrand, &[-w, 0.0, w], &self.quad)?;
        Ok(0.5 * y * y + (p - 1.0) * y.ln() + r.value.ln())
    }

    fn log_moment_split_uncached(&self, y: f64, n: u8) -> Result<f64> {
        let p = self.nu + n as f64;
        let c = self.quad.tail_cutoff;
        let u_s = (1.0 / (1.0 + y.abs())).min(1.0);

        // int_0^{u_s} u^(p-1) sum_k He_k(y) u^k / k! du
        let mut a_prev = 0.0;
        let mut a = 1.0;
        let mut series = a / p;
        let mut quiet = 0;
        for k in 0..400usize {
            let a_next = (y * u_s * a - u_s * u_s * a_prev) / (k as f64 + 1.0);
            a_prev = a;
            a = a_next;
            let term = a / (p + k as f64 + 1.0);
            series += term;
            if term.abs() < 1e-18 * series.abs() {
                quiet += 1;
                if quiet >= 3 {
                    break;
                }
            } else {
                quiet = 0;
            }
        }
        let ln_head = p * u_s.ln() + series.ln();

        let log_f = |u: f64| (p - 1.0) * u.ln() + y * u - 0.5 * u * u;
        // Stationary point of the log-integrand, if it lies past u_s.
        let disc = y * y + 4.0 * (p - 1.0);
        let u_peak = if disc >= 0.0 {
            0.5 * (y + disc.sqrt())
        } else {
            0.0
        };
        let u_top = u_peak.max(u_s);
        let top = log_f(u_top);
        let mut u_hi = u_top + 1.0;
        let mut step = 1.0;
        while log_f(u_hi) > top - c - 10.0 {
            step *= 2.0;
            u_hi = u_top + step;
        }
        let mut breaks = vec![u_s];
        if u_peak > u_s {
            breaks.push(u_peak);
        }
        breaks.push(u_hi);
        let r = integrate_breaks(|u| (log_f(u) - top).exp(), &breaks, &self.quad)?;
        let ln_tail = top + r.value.ln();
        Ok(log_add(ln_head, ln_tail))
    }

    /// `F`, `G` and their log-derivatives at `x`.
    pub fn point(&self, x: f64) -> Result<EigenPoint> {
        let y = self.y(x);
        let f0 = self.log_moment(y, 0)?;
        let f1 = self.log_moment(y, 1)?;
        let g0 = self.log_moment(-y, 0)?;
        let g1 = self.log_moment(-y, 1)?;
        if ![f0, f1, g0, g1].iter().all(|v| v.is_finite()) {
            return Err(Error::OutOfRange { x });
        }
        Ok(EigenPoint {
            x,
            ln_f: f0,
            dlog_f: self.k * (f1 - f0).exp(),
            ln_g: g0,
            dlog_g: -self.k * (g1 - g0).exp(),
        })
    }

    /// `(F''/F, G''/G)` at `x`.
    pub fn curvature(&self, x: f64) -> Result<(f64, f64)> {
        let y = self.y(x);
        let k2 = self.k * self.k;
        let f = k2 * (self.log_moment(y, 2)? - self.log_moment(y, 0)?).exp();
        let g = k2 * (self.log_moment(-y, 2)? - self.log_moment(-y, 0)?).exp();
        Ok((f, g))
    }

    fn eval(&self, x: f64, order: u8, sign_y: f64) -> Result<EigenEval> {
        assert!(order <= 2, "only orders 0, 1, 2 are supported");
        let log_value = self.log_moment(sign_y * self.y(x), order)? + order as f64 * self.k.ln();
        let sign = if sign_y < 0.0 && order % 2 == 1 {
            -1.0
        } else {
            1.0
        };
        Ok(EigenEval {
            value: sign * log_value.exp(),
            log_value,
            order,
        })
    }

    /// `F^(order)(x)` for `order` in `0..=2`.
    #[allow(non_snake_case)]
    pub fn eval_F(&self, x: f64, order: u8) -> Result<EigenEval> {
        self.eval(x, order, 1.0)
    }

    /// `G^(order)(x)` for `order` in `0..=2`.
    #[allow(non_snake_case)]
    pub fn eval_G(&self, x: f64, order: u8) -> Result<EigenEval> {
        self.eval(x, order, -1.0)
    }

    pub fn ln_psi(&self, x: f64) -> Result<f64> {
        let y = self.y(x);
        Ok(self.log_moment(y, 0)? - self.log_moment(-y, 0)?)
    }

    /// `psi = F / G`; underflows to zero far left of `theta`, see [`Self::ln_psi`].
    pub fn psi(&self, x: f64) -> Result<f64> {
        Ok(self.ln_psi(x)?.exp())
    }

    pub fn ln_wronskian(&self, x: f64) -> Result<f64> {
        Ok(self.point(x)?.ln_wronskian())
    }

    /// `W = F'G - FG' > 0`.
    pub fn wronskian(&self, x: f64) -> Result<f64> {
        Ok(self.ln_wronskian(x)?.exp())
    }

    fn ln_two_over_var(&self) -> f64 {
        (2.0 / (self.params.sigma * self.params.sigma)).ln()
    }

    /// `ln Psi(x)` with `Psi = 2F / (sigma^2 W) = 2 / (sigma^2 G (F'/F - G'/G))`.
    pub fn ln_psi_density(&self, x: f64) -> Result<f64> {
        let pt = self.point(x)?;
        Ok(self.ln_two_over_var() - pt.ln_g - pt.ln_spread())
    }

    pub fn psi_density(&self, x: f64) -> Result<f64> {
        Ok(self.ln_psi_density(x)?.exp())
    }

    /// `ln Phi(x)` with `Phi = 2G / (sigma^2 W)`.
    pub fn ln_phi_density(&self, x: f64) -> Result<f64> {
        let pt = self.point(x)?;
        Ok(self.ln_two_over_var() - pt.ln_f - pt.ln_spread())
    }

    pub fn phi_density(&self, x: f64) -> Result<f64> {
        Ok(self.ln_phi_density(x)?.exp())
    }

    /// `E_x[exp(-r tau_kappa)]` for the first passage time to `kappa`.
    pub fn discounted_hitting_factor(&self, x: f64, kappa: f64) -> Result<f64> {
        if x == kappa {
            return Ok(1.0);
        }
        let (yx, yk) = (self.y(x), self.y(kappa));
        let ln = if x < kappa {
            self.log_moment(yx, 0)? - self.log_moment(yk, 0)?
        } else {
            self.log_moment(-yx, 0)? - self.log_moment(-yk, 0)?
        };
        Ok(ln.exp())
    }

    /// Relative residual of `sigma^2/2 u'' + mu (theta - x) u' - r u = 0`
    /// for `u = F` and `u = G`, each normalized by its largest term.
    pub fn ode_residuals(&self, x: f64) -> Result<(f64, f64)> {
        let pt = self.point(x)?;
        let (f2, g2) = self.curvature(x)?;
        let p = &self.params;
        let rel = |second: f64, first: f64| {
            let a = 0.5 * p.sigma * p.sigma * second;
            let b = p.mu * (p.theta - x) * first;
            let c = -p.r;
            (a + b + c).abs() / a.abs().max(b.abs()).max(c.abs())
        };
        Ok((rel(f2, pt.dlog_f), rel(g2, pt.dlog_g)))
    }
}

/// `ln(e^a + e^b)`.
pub fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_case() -> Eigenfunctions {
        Eigenfunctions::new(
            ModelParams::new(0.8, 1.0, 0.2, 0.05).unwrap(),
            QuadratureConfig::default(),
        )
        .unwrap()
    }

    #[test]
    fn ode_residual_small() {
        let e = base_case();
        for i in 0..=60 {
            let x = -2.0 + 0.1 * i as f64;
            let (rf, rg) = e.ode_residuals(x).unwrap();
            assert!(rf < 1e-8 && rg < 1e-8, "x = {x}: {rf:e} {rg:e}");
        }
    }

    #[test]
    fn far_field_matches_asymptotics() {
        // I(-s) ~ Gamma(p) s^-p and I(y) ~ sqrt(2 pi) y^(p-1) e^(y^2/2) as the
        // leading terms, with relative corrections O(1/s^2) and O(1/y^2).
        use statrs::function::gamma::ln_gamma;
        let e = base_case();
        for &s in &[1e3, 1e8, 1e20, 1e60] {
            for n in 0..=2u8 {
                let p = 0.0625 + n as f64;
                let want = ln_gamma(p) - p * f64::ln(s);
                let got = e.log_moment(-s, n).unwrap();
                assert!(
                    (got - want).abs() < 10.0 / (s * s) + 1e-12,
                    "s = {s}, n = {n}: {got} vs {want}"
                );
                let want =
                    0.5 * s * s + (p - 1.0) * s.ln() + (2.0 * std::f64::consts::PI).sqrt().ln();
                if want.is_finite() {
                    let got = e.log_moment(s, n).unwrap();
                    assert!(
                        (got - want).abs() <= 10.0 / (s * s) + 1e-12 * want.abs(),
                        "y = {s}, n = {n}"
                    );
                }
            }
        }
        assert!(e.point(-1e40).unwrap().ln_f.is_finite());
        assert!(matches!(e.point(-1e200), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn routes_agree() {
        let e = base_case();
        for &y in &[-250.0, -63.0, -5.0, -0.3, 0.0, 0.7, 4.0, 40.0, 120.0] {
            for n in 0..=2u8 {
                let a = e.log_moment(y, n).unwrap();
                let b = e.log_moment_split(y, n).unwrap();
                // Agreement of logs to 1e-10 absolute is 1e-10 relative on values.
                assert!((a - b).abs() < 1e-10, "y = {y}, n = {n}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        // Compare log-derivatives: d/dx ln|u^(n)| = u^(n+1) / u^(n).
        let e = base_case();
        let h = 1e-5;
        for &x in &[-3.0, 0.0, 0.9, 1.5] {
            for n in 0..2u8 {
                let fd = |ev: &dyn Fn(f64) -> f64| (ev(x + h) - ev(x - h)) / (2.0 * h);
                let lf = fd(&|z| e.eval_F(z, n).unwrap().log_value);
                let rf = e.eval_F(x, n + 1).unwrap().value / e.eval_F(x, n).unwrap().value;
                assert!((lf / rf - 1.0).abs() < 1e-7, "F order {n} at {x}");
                let lg = fd(&|z| e.eval_G(z, n).unwrap().log_value);
                let rg = e.eval_G(x, n + 1).unwrap().value / e.eval_G(x, n).unwrap().value;
                assert!((lg / rg - 1.0).abs() < 1e-7, "G order {n} at {x}");
            }
            assert!(e.eval_G(x, 1).unwrap().value < 0.0);
        }
    }

    #[test]
    fn deep_left_stays_finite() {
        let e = base_case();
        let g = e.eval_G(-39.0, 0).unwrap();
        assert!(g.value.is_infinite() && g.log_value.is_finite());
        let f = e.eval_F(-39.0, 0).unwrap();
        assert!(f.value > 0.0 && f.log_value.is_finite());
        assert!(e.ln_psi(-29.0).unwrap() < e.ln_psi(-19.0).unwrap());
    }

    #[test]
    fn hitting_factor_bounds() {
        let e = base_case();
        assert_eq!(e.discounted_hitting_factor(0.3, 0.3).unwrap(), 1.0);
        let near = e.discounted_hitting_factor(0.5, 1.0).unwrap();
        let far = e.discounted_hitting_factor(0.0, 1.0).unwrap();
        assert!(0.0 < far && far < near && near < 1.0);
        let above = e.discounted_hitting_factor(1.5, 1.0).unwrap();
        assert!(0.0 < above && above < 1.0);
    }

    #[test]
    fn memo_reuses_evaluations() {
        let e = base_case();
        e.point(0.4).unwrap();
        let n = e.memo_len();
        e.point(0.4).unwrap();
        assert_eq!(n, e.memo_len());
    }
}
