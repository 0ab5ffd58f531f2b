//! Model parameters, rewards, and the sign functions that organize every
//! case split of the entry/exit problems.
//!
//! The log-price follows `dX = mu (theta - X) dt + sigma dB` and cash flows
//! are discounted at rate `r`. Applying the discounted generator to the sell
//! and buy rewards gives `e^x f_sell(x)` and `e^x f_buy(x)`, so the roots of
//! `f_sell` / `f_buy` decide where waiting can beat acting.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::roots::{bisect, expand_bracket, ROOT_TOL};

/// OU dynamics of the log-price plus the discount rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Mean-reversion speed (1/time).
    pub mu: f64,
    /// Long-run mean of the log-price.
    pub theta: f64,
    /// Volatility of the log-price (1/sqrt(time)).
    pub sigma: f64,
    /// Discount rate (1/time).
    pub r: f64,
}

impl ModelParams {
    pub fn new(mu: f64, theta: f64, sigma: f64, r: f64) -> Result<Self> {
        let p = Self {
            mu,
            theta,
            sigma,
            r,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(invalid(
                "mu",
                format!("must be positive and finite, got {}", self.mu),
            ));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(invalid(
                "sigma",
                format!("must be positive and finite, got {}", self.sigma),
            ));
        }
        if !(self.r > 0.0 && self.r.is_finite()) {
            return Err(invalid(
                "r",
                format!("must be positive and finite, got {}", self.r),
            ));
        }
        if !self.theta.is_finite() {
            return Err(invalid("theta", "must be finite"));
        }
        Ok(())
    }

    /// `mu*theta + sigma^2/2 - r`, the constant shared by both sign functions.
    pub fn drift_constant(&self) -> f64 {
        self.mu * self.theta + 0.5 * self.sigma * self.sigma - self.r
    }
}

/// Fixed transaction costs in price units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Costs {
    /// Paid on every purchase.
    pub c_b: f64,
    /// Paid on every sale.
    pub c_s: f64,
}

impl Costs {
    /// Both costs must be strictly positive; a zero buy cost changes the
    /// shape of the entry region and is not supported.
    pub fn new(c_b: f64, c_s: f64) -> Result<Self> {
        let c = Self { c_b, c_s };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c_b > 0.0 && self.c_b.is_finite()) {
            return Err(invalid(
                "c_b",
                format!("must be positive and finite, got {}", self.c_b),
            ));
        }
        if !(self.c_s > 0.0 && self.c_s.is_finite()) {
            return Err(invalid(
                "c_s",
                format!("must be positive and finite, got {}", self.c_s),
            ));
        }
        Ok(())
    }
}

/// Root structure of `f_buy`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FbRoots {
    NoRoot,
    SingleRoot { x0: f64 },
    TwoRoots { x_b1: f64, x_b2: f64 },
}

impl FbRoots {
    pub fn two_roots(&self) -> Option<(f64, f64)> {
        match *self {
            FbRoots::TwoRoots { x_b1, x_b2 } => Some((x_b1, x_b2)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelLandmarks {
    /// Unique root of `f_sell`.
    pub x_s: f64,
    pub fb_roots: FbRoots,
    /// Maximizer of `f_buy`, `ln(r c_b / mu)`.
    pub x_crit: f64,
    /// `theta + sigma^2/(2 mu) - r/mu - 1`, the turning point of `e^x f_buy(x)`.
    pub x_star: f64,
}

pub fn reward_sell(x: f64, costs: &Costs) -> f64 {
    x.exp() - costs.c_s
}

pub fn reward_buy(x: f64, costs: &Costs) -> f64 {
    x.exp() + costs.c_b
}

pub fn f_sell(x: f64, params: &ModelParams, costs: &Costs) -> f64 {
    params.drift_constant() - params.mu * x + params.r * costs.c_s * (-x).exp()
}

pub fn f_buy(x: f64, params: &ModelParams, costs: &Costs) -> f64 {
    params.drift_constant() - params.mu * x - params.r * costs.c_b * (-x).exp()
}

/// Locates `x_s`, classifies the roots of `f_buy`, and records the two
/// analytic reference points used for bracketing and diagnostics.
pub fn landmarks(params: &ModelParams, costs: &Costs) -> Result<ModelLandmarks> {
    params.validate()?;
    costs.validate()?;
    let fs = |x: f64| Ok(f_sell(x, params, costs));
    let fb = |x: f64| Ok(f_buy(x, params, costs));

    // f_sell is strictly decreasing: walk from theta toward the sign change.
    let dir = if f_sell(params.theta, params, costs) > 0.0 {
        1.0
    } else {
        -1.0
    };
    let (lo, hi) = expand_bracket("x_s bracket", fs, params.theta, 0.5, dir)?;
    let x_s = bisect("x_s", fs, lo, hi, ROOT_TOL)?.x;

    let x_crit = (params.r * costs.c_b / params.mu).ln();
    let peak = f_buy(x_crit, params, costs);
    let tie = 1e-12 * (1.0 + params.drift_constant().abs());
    let fb_roots = if peak.abs() <= tie {
        FbRoots::SingleRoot { x0: x_crit }
    } else if peak < 0.0 {
        FbRoots::NoRoot
    } else {
        let (lo, hi) = expand_bracket("x_b1 bracket", fb, x_crit, 0.5, -1.0)?;
        let x_b1 = bisect("x_b1", fb, lo, hi, ROOT_TOL)?.x;
        let (lo, hi) = expand_bracket("x_b2 bracket", fb, x_crit, 0.5, 1.0)?;
        let x_b2 = bisect("x_b2", fb, lo, hi, ROOT_TOL)?.x;
        FbRoots::TwoRoots { x_b1, x_b2 }
    };

    let x_star =
        params.theta + params.sigma * params.sigma / (2.0 * params.mu) - params.r / params.mu - 1.0;
    Ok(ModelLandmarks {
        x_s,
        fb_roots,
        x_crit,
        x_star,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_case() -> (ModelParams, Costs) {
        (
            ModelParams::new(0.8, 1.0, 0.2, 0.05).unwrap(),
            Costs::new(0.02, 0.02).unwrap(),
        )
    }

    #[test]
    fn rewards() {
        let (_, c) = base_case();
        assert!(reward_sell(c.c_s.ln(), &c).abs() < 1e-15);
        assert!((reward_sell(0.0, &c) - 0.98).abs() < 1e-15);
        assert!((reward_buy(0.0, &c) - 1.02).abs() < 1e-15);
        assert!((reward_buy(-800.0, &c) - c.c_b).abs() < 1e-15);
        // e^{1.1310} = 3.0988 to the printed precision.
        assert!((reward_sell(1.1310, &c) - 3.0788).abs() < 1e-4);
        assert!((reward_buy(0.8708, &c) - 2.4088).abs() < 1e-4);
    }

    #[test]
    fn f_buy_stationary_at_x_crit() {
        let (p, c) = base_case();
        let lm = landmarks(&p, &c).unwrap();
        let h = 1e-5;
        let d = (f_buy(lm.x_crit + h, &p, &c) - f_buy(lm.x_crit - h, &p, &c)) / (2.0 * h);
        assert!(d.abs() < 1e-8, "derivative {d}");
    }

    #[test]
    fn sell_sign_table_and_root() {
        let (p, c) = base_case();
        let lm = landmarks(&p, &c).unwrap();
        assert!(f_sell(lm.x_s, &p, &c).abs() <= 1e-10);
        for i in 0..400 {
            let x = -10.0 + 0.03 * i as f64;
            if (x - lm.x_s).abs() < 1e-9 {
                continue;
            }
            assert_eq!(f_sell(x, &p, &c) > 0.0, x < lm.x_s, "x = {x}");
        }
    }

    #[test]
    fn base_case_has_two_buy_roots_in_order() {
        let (p, c) = base_case();
        let lm = landmarks(&p, &c).unwrap();
        let (b1, b2) = lm.fb_roots.two_roots().expect("two roots");
        assert!(b1 < lm.x_star && lm.x_star < b2 && b2 < lm.x_s);
        // Sign pattern (-, +, -) on a grid.
        for i in 0..2000 {
            let x = -15.0 + 0.01 * i as f64;
            let v = f_buy(x, &p, &c);
            if (x - b1).abs() < 1e-9 || (x - b2).abs() < 1e-9 {
                continue;
            }
            assert_eq!(v > 0.0, x > b1 && x < b2, "x = {x}");
        }
    }

    #[test]
    fn large_buy_cost_has_no_root() {
        let (p, _) = base_case();
        // f_buy(x_crit) = mu (theta - x_crit - 1) + sigma^2/2 - r < 0 once
        // x_crit = ln(r c_b / mu) exceeds x_star.
        let x_star = 1.0 + 0.04 / 1.6 - 0.05 / 0.8 - 1.0;
        let c_b = 1.01 * p.mu * f64::exp(x_star) / p.r;
        let c = Costs::new(c_b, 0.02).unwrap();
        let lm = landmarks(&p, &c).unwrap();
        assert_eq!(lm.fb_roots, FbRoots::NoRoot);
        for i in 0..3000 {
            let x = -20.0 + 0.01 * i as f64;
            assert!(f_buy(x, &p, &c) < 0.0);
        }
    }

    #[test]
    fn tangent_case_is_single_root() {
        let (p, _) = base_case();
        let x_star: f64 = p.theta + p.sigma * p.sigma / (2.0 * p.mu) - p.r / p.mu - 1.0;
        let c = Costs::new(p.mu * x_star.exp() / p.r, 0.02).unwrap();
        let lm = landmarks(&p, &c).unwrap();
        assert!(
            matches!(lm.fb_roots, FbRoots::SingleRoot { .. }),
            "{:?}",
            lm.fb_roots
        );
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(ModelParams::new(0.0, 1.0, 0.2, 0.05).is_err());
        assert!(ModelParams::new(0.8, 1.0, -0.2, 0.05).is_err());
        assert!(ModelParams::new(0.8, f64::NAN, 0.2, 0.05).is_err());
        assert!(ModelParams::new(0.8, 1.0, 0.2, 0.0).is_err());
        assert!(Costs::new(0.0, 0.02).is_err());
        assert!(Costs::new(0.02, 0.0).is_err());
    }
}
