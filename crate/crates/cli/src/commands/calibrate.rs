use std::path::Path;

use serde::Deserialize;
use serde_json::json;
use xoutrade_core::calibration::{check_uniform_spacing, fit_prices};

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::record::{to_value, Outcome};

#[derive(Debug, Deserialize)]
struct PriceRow {
    timestamp: f64,
    price: f64,
}

/// Reads `timestamp,price` rows. Timestamps are numeric and in any unit.
pub fn read_prices(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let data_err = |message: String| CliError::Data {
        path: path.to_path_buf(),
        message,
    };
    let mut rdr = csv::Reader::from_path(path).map_err(|e| data_err(e.to_string()))?;
    let (mut times, mut prices) = (Vec::new(), Vec::new());
    for (i, row) in rdr.deserialize::<PriceRow>().enumerate() {
        let row = row.map_err(|e| data_err(format!("row {}: {e}", i + 1)))?;
        times.push(row.timestamp);
        prices.push(row.price);
    }
    Ok((times, prices))
}

pub fn calibrate(cfg: &RunConfig) -> Result<Outcome> {
    let path = cfg
        .prices
        .as_deref()
        .ok_or_else(|| CliError::Config("missing required key `prices`".into()))?;
    let dt = RunConfig::require(cfg.dt, "dt")?;
    let (times, prices) = read_prices(path)?;
    if times.len() >= 2 && !(times[1] > times[0]) {
        return Err(CliError::Data {
            path: path.to_path_buf(),
            message: "timestamps must increase".into(),
        });
    }
    if times.len() >= 2 {
        // dt is in years while timestamps may use any unit; only their
        // spacing has to be uniform.
        check_uniform_spacing(&times, times[1] - times[0], 1e-6).map_err(|e| CliError::Data {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
    }
    let fit = fit_prices(&prices, dt)?;
    let mut fitted = json!({
        "mu": fit.mu.value,
        "theta": fit.theta.value,
        "sigma": fit.sigma.value,
    });
    if let Some(r) = cfg.r {
        fitted["r"] = json!(r);
    }
    Ok(Outcome::ok(
        json!({ "fit": to_value(&fit)?, "fitted_params": fitted }),
    ))
}
