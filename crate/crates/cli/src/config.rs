//! Run configuration: a flat TOML file, overridden key by key from the
//! command line. A JSON record written by any command can be passed as the
//! config; its `input` section is used.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use xoutrade_core::simulation::{DEFAULT_DT, DEFAULT_HORIZON};
use xoutrade_core::verification::VI_TOLERANCE;
use xoutrade_core::{Costs, Eigenfunctions, ModelParams, QuadratureConfig};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum SweepVar {
    Mu,
    Theta,
    Sigma,
    R,
    #[serde(rename = "c_b")]
    #[value(name = "c_b")]
    CB,
    #[serde(rename = "c_s")]
    #[value(name = "c_s")]
    CS,
}

impl SweepVar {
    pub fn name(self) -> &'static str {
        match self {
            SweepVar::Mu => "mu",
            SweepVar::Theta => "theta",
            SweepVar::Sigma => "sigma",
            SweepVar::R => "r",
            SweepVar::CB => "c_b",
            SweepVar::CS => "c_s",
        }
    }
}

/// Every key a command can read. Keys a command does not use are ignored by
/// it but still echoed.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Mean-reversion speed
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    /// Long-run mean of the log price
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    /// Volatility of the log price
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    /// Discount rate
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    /// Cost per purchase
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_b: Option<f64>,
    /// Cost per sale
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_s: Option<f64>,

    /// Relative tolerance of every quadrature
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rel_tol: Option<f64>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub abs_tol: Option<f64>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_subdivisions: Option<usize>,
    /// Log-units below the peak at which integrand tails are dropped
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail_cutoff: Option<f64>,

    /// Parameter varied by `sweep`
    #[arg(long, value_enum)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep_var: Option<SweepVar>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep_from: Option<f64>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep_to: Option<f64>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep_points: Option<usize>,

    /// Starting log price (default: theta)
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<f64>,
    /// Starting price; alternative to x0
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start_price: Option<f64>,
    /// Time step in years (simulation grid, or spacing of calibration data)
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    /// Simulated horizon in years
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Monte Carlo paths for value estimates in `simulate` (0 = none)
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_paths: Option<usize>,

    /// Grid points for the residual checks in `verify`
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_points: Option<usize>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vi_tolerance: Option<f64>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub majorant_tolerance: Option<f64>,
    /// Shift added to the solved repeated-trading exit level before `verify`
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturb_exit: Option<f64>,

    /// Price CSV for `calibrate` (columns: timestamp, price)
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prices: Option<PathBuf>,
}

macro_rules! overlay {
    ($dst:ident, $src:ident; $($f:ident),*) => {
        $( if $src.$f.is_some() { $dst.$f = $src.$f.clone(); } )*
    };
}

impl RunConfig {
    /// Reads a TOML config, or the `input` section of a JSON record.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let err = |m: String| CliError::Config(format!("{}: {m}", path.display()));
        if path.extension().is_some_and(|e| e == "json") {
            #[derive(Deserialize)]
            struct Wrapper {
                input: RunConfig,
            }
            let w: Wrapper = serde_json::from_str(&text).map_err(|e| err(e.to_string()))?;
            Ok(w.input)
        } else {
            toml::from_str(&text).map_err(|e| err(e.to_string()))
        }
    }

    /// Config file (if any) with every flag that was given applied on top.
    pub fn resolve(file: Option<&Path>, flags: &RunConfig) -> Result<Self> {
        let mut cfg = match file {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        cfg.overlay(flags);
        Ok(cfg)
    }

    pub fn overlay(&mut self, o: &RunConfig) {
        overlay!(self, o; mu, theta, sigma, r, c_b, c_s, rel_tol, abs_tol, max_subdivisions,
            tail_cutoff, sweep_var, sweep_from, sweep_to, sweep_points, x0, start_price, dt,
            horizon, seed, n_paths, grid_points, vi_tolerance, majorant_tolerance,
            perturb_exit, prices);
    }

    pub fn fill_quadrature_defaults(&mut self) {
        let q = QuadratureConfig::default();
        self.rel_tol.get_or_insert(q.rel_tol);
        self.abs_tol.get_or_insert(q.abs_tol);
        self.max_subdivisions.get_or_insert(q.max_subdivisions);
        self.tail_cutoff.get_or_insert(q.tail_cutoff);
    }

    pub fn fill_simulation_defaults(&mut self) {
        self.dt.get_or_insert(DEFAULT_DT);
        self.horizon.get_or_insert(DEFAULT_HORIZON);
        self.seed.get_or_insert(1);
        self.n_paths.get_or_insert(0);
        if self.start_price.is_none() {
            if let Some(t) = self.theta {
                self.x0.get_or_insert(t);
            }
        }
    }

    pub fn fill_verify_defaults(&mut self) {
        self.grid_points.get_or_insert(4000);
        self.vi_tolerance.get_or_insert(VI_TOLERANCE);
        self.majorant_tolerance.get_or_insert(1e-4);
        self.perturb_exit.get_or_insert(0.0);
    }

    pub fn require<T: Copy>(value: Option<T>, key: &str) -> Result<T> {
        value.ok_or_else(|| CliError::Config(format!("missing required key `{key}`")))
    }

    pub fn model(&self) -> Result<ModelParams> {
        Ok(ModelParams::new(
            Self::require(self.mu, "mu")?,
            Self::require(self.theta, "theta")?,
            Self::require(self.sigma, "sigma")?,
            Self::require(self.r, "r")?,
        )?)
    }

    pub fn costs(&self) -> Result<Costs> {
        Ok(Costs::new(
            Self::require(self.c_b, "c_b")?,
            Self::require(self.c_s, "c_s")?,
        )?)
    }

    pub fn quadrature(&self) -> QuadratureConfig {
        let d = QuadratureConfig::default();
        QuadratureConfig {
            rel_tol: self.rel_tol.unwrap_or(d.rel_tol),
            abs_tol: self.abs_tol.unwrap_or(d.abs_tol),
            max_subdivisions: self.max_subdivisions.unwrap_or(d.max_subdivisions),
            tail_cutoff: self.tail_cutoff.unwrap_or(d.tail_cutoff),
        }
    }

    pub fn eigenfunctions(&self) -> Result<Eigenfunctions> {
        Ok(Eigenfunctions::new(self.model()?, self.quadrature())?)
    }

    /// Starting log price for `simulate`.
    pub fn start_log_price(&self) -> Result<f64> {
        match (self.x0, self.start_price) {
            (Some(_), Some(_)) => Err(CliError::Config(
                "set only one of `x0` and `start_price`".into(),
            )),
            (_, Some(p)) if !(p > 0.0 && p.is_finite()) => Err(CliError::Config(format!(
                "`start_price` must be positive, got {p}"
            ))),
            (_, Some(p)) => Ok(p.ln()),
            (Some(x), None) => Ok(x),
            (None, None) => Self::require(self.theta, "theta"),
        }
    }

    /// Copy with `var` set to `value`.
    pub fn with_var(&self, var: SweepVar, value: f64) -> Self {
        let mut c = self.clone();
        let slot = match var {
            SweepVar::Mu => &mut c.mu,
            SweepVar::Theta => &mut c.theta,
            SweepVar::Sigma => &mut c.sigma,
            SweepVar::R => &mut c.r,
            SweepVar::CB => &mut c.c_b,
            SweepVar::CS => &mut c.c_s,
        };
        *slot = Some(value);
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_key_is_named() {
        let err = toml::from_str::<RunConfig>("mu = 0.8\nmuu = 1.0\n").unwrap_err();
        assert!(err.to_string().contains("muu"), "{err}");
    }

    #[test]
    fn flags_override_file_values() {
        let mut base: RunConfig =
            toml::from_str("mu = 0.8\ntheta = 1.0\nsweep_var = \"c_b\"").unwrap();
        base.overlay(&RunConfig {
            mu: Some(0.5),
            ..Default::default()
        });
        assert_eq!(base.mu, Some(0.5));
        assert_eq!(base.theta, Some(1.0));
        assert_eq!(base.sweep_var, Some(SweepVar::CB));
    }

    #[test]
    fn start_price_and_x0_conflict() {
        let c = RunConfig {
            x0: Some(1.0),
            start_price: Some(2.0),
            ..Default::default()
        };
        assert!(c.start_log_price().is_err());
        let c = RunConfig {
            start_price: Some(2.6011),
            ..Default::default()
        };
        assert!((c.start_log_price().unwrap() - 2.6011f64.ln()).abs() < 1e-15);
    }
}
