use std::path::Path;

use serde_json::{json, Value};
use xoutrade_core::double_stopping::value_entry;
use xoutrade_core::simulation::{
    execute_strategy, mc_value, monitoring_shift, sample_path, EventKind, Position,
};
use xoutrade_core::switching::value_j_tilde;
use xoutrade_core::{McConfig, PathSpec, Strategy, TradeLog};

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::format::csv_number;
use crate::record::{to_value, Outcome};

use super::{csv_error, csv_writer, solve_both};

fn log_json(strategy: &Strategy, log: &TradeLog) -> Result<Value> {
    let entries = log
        .events
        .iter()
        .filter(|e| e.kind == EventKind::Enter)
        .count();
    let exits = log.events.len() - entries;
    Ok(json!({
        "strategy": to_value(strategy)?,
        "entries": entries,
        "exits": exits,
        "round_trips": exits.min(entries),
        "discounted_cashflow": log.discounted_cashflow,
        "events": to_value(&log.events)?,
    }))
}

pub fn simulate(
    cfg: &RunConfig,
    path_csv: Option<&Path>,
    trades_csv: Option<&Path>,
) -> Result<Outcome> {
    let s = solve_both(cfg)?;
    let params = *s.eig.params();
    let x0 = cfg.start_log_price()?;
    let dt = RunConfig::require(cfg.dt, "dt")?;
    let horizon = RunConfig::require(cfg.horizon, "horizon")?;
    let seed = RunConfig::require(cfg.seed, "seed")?;
    let n_paths = cfg.n_paths.unwrap_or(0);
    if !(horizon >= dt && horizon.is_finite()) {
        return Err(CliError::Config(format!(
            "`horizon` must be at least dt, got {horizon}"
        )));
    }
    let spec = PathSpec {
        x0,
        dt,
        n_steps: (horizon / dt).round() as usize,
        seed,
    };
    let path = sample_path(&spec, &params)?;

    let mut strategies: Vec<(&str, Strategy)> = Vec::new();
    if let Ok(d) = &s.double {
        strategies.push(("double_stopping", Strategy::from_double_stopping(d)));
    }
    strategies.push(("switching", Strategy::from_switching(&s.switching)));
    let logs: Vec<TradeLog> = strategies
        .iter()
        .map(|(_, st)| execute_strategy(&path, *st, Position::Flat, &params, &s.costs))
        .collect();

    if let Some(p) = path_csv {
        let mut w = csv_writer(p)?;
        w.write_record(["t", "x", "price"])
            .map_err(|e| csv_error(p, e))?;
        for (i, x) in path.x.iter().enumerate() {
            w.write_record([
                csv_number(path.time(i)),
                csv_number(*x),
                csv_number(x.exp()),
            ])
            .map_err(|e| csv_error(p, e))?;
        }
        w.flush().map_err(|source| CliError::Io {
            path: p.to_path_buf(),
            source,
        })?;
    }
    if let Some(p) = trades_csv {
        let mut w = csv_writer(p)?;
        w.write_record(["strategy", "time", "kind", "log_price", "price"])
            .map_err(|e| csv_error(p, e))?;
        for ((name, _), log) in strategies.iter().zip(&logs) {
            for e in &log.events {
                let kind = match e.kind {
                    EventKind::Enter => "enter",
                    EventKind::Exit => "exit",
                };
                w.write_record([
                    name.to_string(),
                    csv_number(e.time),
                    kind.to_string(),
                    csv_number(e.log_price),
                    csv_number(e.log_price.exp()),
                ])
                .map_err(|e| csv_error(p, e))?;
            }
        }
        w.flush().map_err(|source| CliError::Io {
            path: p.to_path_buf(),
            source,
        })?;
    }

    let mut result = json!({
        "x0": x0,
        "start_price": x0.exp(),
        "n_steps": spec.n_steps,
    });
    for ((name, st), log) in strategies.iter().zip(&logs) {
        result[*name] = log_json(st, log)?;
    }
    if n_paths > 0 {
        let mc = McConfig {
            n_paths,
            dt,
            horizon,
            seed,
        };
        let mut out = json!({ "monitoring_shift": monitoring_shift(&params, dt) });
        for (name, st) in &strategies {
            let est = mc_value(x0, *st, Position::Flat, &params, &s.costs, &mc)?;
            let analytic = match (*name, &s.double) {
                ("double_stopping", Ok(d)) => value_entry(&s.eig, &s.costs, d, x0)?,
                _ => value_j_tilde(&s.eig, &s.costs, &s.switching, x0)?,
            };
            out[*name] = json!({
                "estimate": to_value(&est)?,
                "analytic": analytic,
                "z_score": est.std_error.map(|se| (est.estimate - analytic) / se),
            });
        }
        result["monte_carlo"] = out;
    }
    Ok(Outcome {
        result,
        seeds: vec![seed],
        failure: None,
    })
}
