//! Exact-transition OU sampling, threshold-strategy execution and Monte Carlo
//! valuation.
//!
//! Paths are monitored on the simulation grid only, so crossings are
//! detected late. A grid-monitored strategy is still an admissible strategy,
//! which makes the Monte Carlo value of an optimal rule biased low, never
//! high.
//!
//! Random streams: path `i` of a run with root seed `s` draws from
//! `ChaCha8Rng::seed_from_u64(s)` switched to stream `i`. Results therefore
//! do not depend on how paths are spread over threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::double_stopping::DoubleStoppingSolution;
use crate::error::{invalid, Result};
use crate::model::{reward_buy, reward_sell, Costs, ModelParams};
use crate::switching::SwitchingSolution;

/// Default monitoring step: ten checks per trading day.
pub const DEFAULT_DT: f64 = 1.0 / 2520.0;
pub const DEFAULT_HORIZON: f64 = 200.0;

/// Discrete-monitoring shift constant `zeta(1/2) / sqrt(2 pi)`.
pub const MONITORING_SHIFT: f64 = 0.5826;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathSpec {
    pub x0: f64,
    pub dt: f64,
    pub n_steps: usize,
    pub seed: u64,
}

impl PathSpec {
    pub fn validate(&self) -> Result<()> {
        if !self.x0.is_finite() {
            return Err(invalid("x0", format!("must be finite, got {}", self.x0)));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(invalid("dt", format!("must be positive, got {}", self.dt)));
        }
        if self.n_steps == 0 {
            return Err(invalid("n_steps", "must be at least 1".to_string()));
        }
        Ok(())
    }
}

/// Log-prices on a uniform time grid starting at `t = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub dt: f64,
    pub x: Vec<f64>,
}

impl Path {
    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.dt
    }
}

/// One exact OU transition over a fixed step.
#[derive(Debug, Clone, Copy)]
pub struct OuStep {
    theta: f64,
    decay: f64,
    sd: f64,
}

impl OuStep {
    pub fn new(params: &ModelParams, dt: f64) -> Self {
        let decay = (-params.mu * dt).exp();
        let var =
            params.sigma * params.sigma * (-(-2.0 * params.mu * dt).exp_m1()) / (2.0 * params.mu);
        Self {
            theta: params.theta,
            decay,
            sd: var.sqrt(),
        }
    }

    #[inline]
    pub fn advance(&self, x: f64, z: f64) -> f64 {
        self.theta + (x - self.theta) * self.decay + self.sd * z
    }
}

/// The generator for path `index` under root seed `seed`.
pub fn path_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

pub fn sample_path(spec: &PathSpec, params: &ModelParams) -> Result<Path> {
    spec.validate()?;
    params.validate()?;
    let step = OuStep::new(params, spec.dt);
    let mut rng = path_rng(spec.seed, 0);
    let mut x = Vec::with_capacity(spec.n_steps + 1);
    let mut cur = spec.x0;
    x.push(cur);
    for _ in 0..spec.n_steps {
        let z: f64 = StandardNormal.sample(&mut rng);
        cur = step.advance(cur, z);
        x.push(cur);
    }
    Ok(Path { dt: spec.dt, x })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Position {
    Flat,
    Long,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Enter,
    Exit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TradeEvent {
    pub time: f64,
    pub kind: EventKind,
    pub log_price: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TradeLog {
    pub events: Vec<TradeEvent>,
    pub discounted_cashflow: f64,
}

/// A threshold trading rule in log-price units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Strategy {
    /// Buy on the first visit to `[entry_lo, entry_hi]`, sell at `exit`, stop.
    SingleRoundTrip {
        entry_lo: f64,
        entry_hi: f64,
        exit: f64,
    },
    /// First buy on `[entry_lo, entry_hi]`, later buys at `entry_hi` or
    /// below, every sale at `exit`.
    Recurrent {
        entry_lo: f64,
        entry_hi: f64,
        exit: f64,
    },
    /// Never buy; a held unit is sold at `exit`.
    ExitOnly { exit: f64 },
}

impl Strategy {
    pub fn from_double_stopping(sol: &DoubleStoppingSolution) -> Self {
        Strategy::SingleRoundTrip {
            entry_lo: sol.a_star,
            entry_hi: sol.d_star,
            exit: sol.b_star,
        }
    }

    pub fn from_switching(sol: &SwitchingSolution) -> Self {
        match *sol {
            SwitchingSolution::NoEntry { b_star } => Strategy::ExitOnly { exit: b_star },
            SwitchingSolution::Recurrent {
                a_tilde,
                d_tilde,
                b_tilde,
                ..
            } => Strategy::Recurrent {
                entry_lo: a_tilde,
                entry_hi: d_tilde,
                exit: b_tilde,
            },
        }
    }

    fn exit_level(&self) -> f64 {
        match *self {
            Strategy::SingleRoundTrip { exit, .. }
            | Strategy::Recurrent { exit, .. }
            | Strategy::ExitOnly { exit } => exit,
        }
    }
}

/// Streaming executor: feed grid observations, get trade decisions.
#[derive(Debug, Clone)]
pub struct Executor {
    strategy: Strategy,
    position: Position,
    entries: usize,
    exits: usize,
    done: bool,
}

impl Executor {
    pub fn new(strategy: Strategy, start: Position) -> Self {
        Self {
            strategy,
            position: start,
            entries: 0,
            exits: 0,
            done: false,
        }
    }

    /// No further event can happen.
    pub fn finished(&self) -> bool {
        self.done
    }

    pub fn position(&self) -> Position {
        self.position
    }

    pub fn observe(&mut self, x: f64) -> Option<EventKind> {
        if self.done {
            return None;
        }
        match self.position {
            Position::Long => {
                if x >= self.strategy.exit_level() {
                    self.position = Position::Flat;
                    self.exits += 1;
                    self.done = match self.strategy {
                        Strategy::SingleRoundTrip { .. } | Strategy::ExitOnly { .. } => true,
                        Strategy::Recurrent { .. } => false,
                    };
                    return Some(EventKind::Exit);
                }
                None
            }
            Position::Flat => {
                let buy = match self.strategy {
                    Strategy::ExitOnly { .. } => {
                        self.done = true;
                        false
                    }
                    Strategy::SingleRoundTrip {
                        entry_lo, entry_hi, ..
                    } => x >= entry_lo && x <= entry_hi,
                    Strategy::Recurrent {
                        entry_lo, entry_hi, ..
                    } => {
                        // Only the very first purchase respects the lower level.
                        if self.entries == 0 && self.exits == 0 {
                            x >= entry_lo && x <= entry_hi
                        } else {
                            x <= entry_hi
                        }
                    }
                };
                if buy {
                    self.position = Position::Long;
                    self.entries += 1;
                    Some(EventKind::Enter)
                } else {
                    None
                }
            }
        }
    }
}

fn cashflow(kind: EventKind, x: f64, costs: &Costs) -> f64 {
    match kind {
        EventKind::Enter => -reward_buy(x, costs),
        EventKind::Exit => reward_sell(x, costs),
    }
}

/// Runs `strategy` along a sampled path.
pub fn execute_strategy(
    path: &Path,
    strategy: Strategy,
    start: Position,
    params: &ModelParams,
    costs: &Costs,
) -> TradeLog {
    let mut ex = Executor::new(strategy, start);
    let mut log = TradeLog::default();
    for (i, &x) in path.x.iter().enumerate() {
        if ex.finished() {
            break;
        }
        if let Some(kind) = ex.observe(x) {
            let t = path.time(i);
            log.events.push(TradeEvent {
                time: t,
                kind,
                log_price: x,
            });
            log.discounted_cashflow += (-params.r * t).exp() * cashflow(kind, x, costs);
        }
    }
    log
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub n_paths: usize,
    pub dt: f64,
    pub horizon: f64,
    pub seed: u64,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            n_paths: 200_000,
            dt: DEFAULT_DT,
            horizon: DEFAULT_HORIZON,
            seed: 1,
        }
    }
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_paths == 0 {
            return Err(invalid("n_paths", "must be at least 1".to_string()));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(invalid("dt", format!("must be positive, got {}", self.dt)));
        }
        if !(self.horizon >= self.dt && self.horizon.is_finite()) {
            return Err(invalid(
                "horizon",
                format!("must be at least dt, got {}", self.horizon),
            ));
        }
        Ok(())
    }

    fn n_steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub estimate: f64,
    /// Unavailable with a single path.
    pub std_error: Option<f64>,
    pub n_paths: usize,
    /// `exp(-r * horizon)`: times a bound on the value function, this
    /// bounds what truncating at the horizon can have cut off.
    pub truncation_factor: f64,
}

/// Sum with a fixed pairwise tree, independent of thread scheduling.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 16 {
        return v.iter().sum();
    }
    let (a, b) = v.split_at(v.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

fn summarize(samples: Vec<f64>, params: &ModelParams, cfg: &McConfig) -> McEstimate {
    let n = samples.len() as f64;
    let mean = pairwise_sum(&samples) / n;
    let std_error = if samples.len() > 1 {
        let sq: Vec<f64> = samples.iter().map(|s| (s - mean) * (s - mean)).collect();
        Some((pairwise_sum(&sq) / (n - 1.0) / n).sqrt())
    } else {
        None
    };
    McEstimate {
        estimate: mean,
        std_error,
        n_paths: samples.len(),
        truncation_factor: (-params.r * cfg.horizon).exp(),
    }
}

/// Simulates path `index`, calling `visit(t, x)` at every grid point
/// (including `t = 0`) until it returns `false` or the horizon is reached.
fn walk(
    x0: f64,
    step: &OuStep,
    cfg: &McConfig,
    index: u64,
    mut visit: impl FnMut(f64, f64) -> bool,
) {
    let mut rng = path_rng(cfg.seed, index);
    let mut x = x0;
    if !visit(0.0, x) {
        return;
    }
    for i in 1..=cfg.n_steps() {
        let z: f64 = StandardNormal.sample(&mut rng);
        x = step.advance(x, z);
        if !visit(i as f64 * cfg.dt, x) {
            return;
        }
    }
}

/// Mean discounted cashflow of `strategy` started at `x0`.
pub fn mc_value(
    x0: f64,
    strategy: Strategy,
    start: Position,
    params: &ModelParams,
    costs: &Costs,
    cfg: &McConfig,
) -> Result<McEstimate> {
    params.validate()?;
    costs.validate()?;
    cfg.validate()?;
    let step = OuStep::new(params, cfg.dt);
    let samples: Vec<f64> = (0..cfg.n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut ex = Executor::new(strategy, start);
            let mut total = 0.0;
            walk(x0, &step, cfg, i, |t, x| {
                if let Some(kind) = ex.observe(x) {
                    total += (-params.r * t).exp() * cashflow(kind, x, costs);
                }
                !ex.finished()
            });
            total
        })
        .collect();
    Ok(summarize(samples, params, cfg))
}

/// How a barrier crossing is detected between grid points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Monitoring {
    /// Only grid observations count; hits are late by `O(sqrt(dt))`.
    Discrete,
    /// Between two observations that stay on one side, the path crosses
    /// with the Brownian-bridge probability
    /// `exp(-2 (kappa - x0)(kappa - x1) / (sigma^2 dt))`; such hits are
    /// dated at the midpoint of the step.
    Bridge,
}

/// Monte Carlo estimate of `E_x0[exp(-r tau_kappa)]`.
pub fn mc_hitting_factor(
    x0: f64,
    kappa: f64,
    params: &ModelParams,
    cfg: &McConfig,
    monitoring: Monitoring,
) -> Result<McEstimate> {
    params.validate()?;
    cfg.validate()?;
    let step = OuStep::new(params, cfg.dt);
    let up = x0 <= kappa;
    let inv_var = 1.0 / (params.sigma * params.sigma * cfg.dt);
    let samples: Vec<f64> = (0..cfg.n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(cfg.seed, i);
            let mut x = x0;
            let crossed = |x: f64| if up { x >= kappa } else { x <= kappa };
            if crossed(x) {
                return 1.0;
            }
            for k in 1..=cfg.n_steps() {
                let z: f64 = StandardNormal.sample(&mut rng);
                let next = step.advance(x, z);
                let t = k as f64 * cfg.dt;
                if crossed(next) {
                    return (-params.r * t).exp();
                }
                if monitoring == Monitoring::Bridge {
                    let p = (-2.0 * (kappa - x) * (kappa - next) * inv_var).exp();
                    if rng.random::<f64>() < p {
                        return (-params.r * (t - 0.5 * cfg.dt)).exp();
                    }
                }
                x = next;
            }
            0.0
        })
        .collect();
    Ok(summarize(samples, params, cfg))
}

/// Threshold shift that makes grid monitoring with step `dt` comparable to
/// continuous monitoring, doubled for use as a conservative bias bound.
pub fn monitoring_shift(params: &ModelParams, dt: f64) -> f64 {
    2.0 * MONITORING_SHIFT * params.sigma * dt.sqrt()
}
