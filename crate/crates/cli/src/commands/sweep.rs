use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::config::{RunConfig, SweepVar};
use crate::error::{CliError, Result};
use crate::format::{csv_number, csv_opt};
use crate::record::{to_value, Outcome};

use super::{csv_error, csv_writer, solve_both};

/// Column order of the sweep CSV.
pub const SWEEP_COLUMNS: [&str; 16] = [
    "var",
    "value",
    "case",
    "b_star",
    "d_star",
    "a_star",
    "b_tilde",
    "d_tilde",
    "a_tilde",
    "price_b_star",
    "price_d_star",
    "price_a_star",
    "price_b_tilde",
    "price_d_tilde",
    "price_a_tilde",
    "error",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub case: Option<String>,
    pub b_star: Option<f64>,
    pub d_star: Option<f64>,
    pub a_star: Option<f64>,
    pub b_tilde: Option<f64>,
    pub d_tilde: Option<f64>,
    pub a_tilde: Option<f64>,
    /// Empty when everything solved.
    pub error: String,
}

fn row(cfg: &RunConfig, var: SweepVar, value: f64) -> SweepRow {
    let mut out = SweepRow {
        value,
        case: None,
        b_star: None,
        d_star: None,
        a_star: None,
        b_tilde: None,
        d_tilde: None,
        a_tilde: None,
        error: String::new(),
    };
    let s = match solve_both(&cfg.with_var(var, value)) {
        Ok(s) => s,
        Err(e) => {
            out.error = e.to_string();
            return out;
        }
    };
    out.case = serde_json::to_value(s.case.case)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string));
    out.b_tilde = Some(s.switching.exit_level());
    if let Some((lo, hi)) = s.switching.entry_interval() {
        out.a_tilde = Some(lo);
        out.d_tilde = Some(hi);
    }
    match s.double {
        Ok(d) => {
            out.b_star = Some(d.b_star);
            out.d_star = Some(d.d_star);
            out.a_star = Some(d.a_star);
        }
        Err(e) => {
            // The exit level does not depend on the entry problem.
            out.b_star = Some(s.case.b_star);
            out.error = format!("double stopping: {e}");
        }
    }
    out
}

pub fn grid(from: f64, to: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![from];
    }
    (0..points)
        .map(|i| from + (to - from) * i as f64 / (points - 1) as f64)
        .collect()
}

pub fn sweep(cfg: &RunConfig, csv_path: Option<&Path>) -> Result<Outcome> {
    let var = RunConfig::require(cfg.sweep_var, "sweep_var")?;
    let from = RunConfig::require(cfg.sweep_from, "sweep_from")?;
    let to = RunConfig::require(cfg.sweep_to, "sweep_to")?;
    let points = RunConfig::require(cfg.sweep_points, "sweep_points")?;
    if points == 0 {
        return Err(CliError::Config("`sweep_points` must be at least 1".into()));
    }
    // Fail fast on a config that is invalid regardless of the swept value.
    cfg.with_var(var, from).model()?;
    cfg.with_var(var, from).costs()?;

    let rows: Vec<SweepRow> = grid(from, to, points)
        .into_par_iter()
        .map(|v| row(cfg, var, v))
        .collect();

    if let Some(path) = csv_path {
        let mut w = csv_writer(path)?;
        w.write_record(SWEEP_COLUMNS)
            .map_err(|e| csv_error(path, e))?;
        for r in &rows {
            let levels = [
                r.b_star, r.d_star, r.a_star, r.b_tilde, r.d_tilde, r.a_tilde,
            ];
            let mut rec = vec![
                var.name().to_string(),
                csv_number(r.value),
                r.case.clone().unwrap_or_default(),
            ];
            rec.extend(levels.iter().map(|l| csv_opt(*l)));
            rec.extend(levels.iter().map(|l| csv_opt(l.map(f64::exp))));
            rec.push(r.error.clone());
            w.write_record(&rec).map_err(|e| csv_error(path, e))?;
        }
        w.flush().map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
    }
    let failed = rows.iter().filter(|r| !r.error.is_empty()).count();
    Ok(Outcome::ok(json!({
        "sweep_var": var.name(),
        "rows_with_errors": failed,
        "rows": to_value(&rows)?,
    })))
}
