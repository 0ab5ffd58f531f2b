use std::path::Path;

use serde_json::{json, Value};
use xoutrade_core::verification::{
    build_transforms, majorant_oracle, shape_property_suite, uniform_grid, vi_residuals,
    vi_residuals_double,
};
use xoutrade_core::ResidualReport;

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::format::csv_number;
use crate::record::{to_value, Outcome};

use super::{csv_error, csv_writer, solve_both};

/// Report without the per-point arrays, which go to the CSV instead.
fn summary(r: &ResidualReport) -> Result<Value> {
    let mut v = to_value(r)?;
    if let Value::Object(o) = &mut v {
        for k in ["grid", "vi_j_residuals", "vi_v_residuals", "excluded"] {
            o.remove(k);
        }
    }
    Ok(v)
}

fn write_residuals(path: &Path, reports: &[(&str, &ResidualReport)]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["problem", "x", "flat_residual", "held_residual", "excluded"])
        .map_err(|e| csv_error(path, e))?;
    for (name, r) in reports {
        for i in 0..r.grid.len() {
            w.write_record([
                name.to_string(),
                csv_number(r.grid[i]),
                csv_number(r.vi_j_residuals[i]),
                csv_number(r.vi_v_residuals[i]),
                r.excluded[i].to_string(),
            ])
            .map_err(|e| csv_error(path, e))?;
        }
    }
    w.flush().map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn verify(cfg: &RunConfig, csv_path: Option<&Path>) -> Result<Outcome> {
    let s = solve_both(cfg)?;
    let n = RunConfig::require(cfg.grid_points, "grid_points")?;
    let tol = RunConfig::require(cfg.vi_tolerance, "vi_tolerance")?;
    let maj_tol = RunConfig::require(cfg.majorant_tolerance, "majorant_tolerance")?;
    let shift = cfg.perturb_exit.unwrap_or(0.0);
    if n < 10 {
        return Err(CliError::Config("`grid_points` must be at least 10".into()));
    }
    let (eig, costs) = (&s.eig, &s.costs);
    let theta = eig.params().theta;
    let grid = uniform_grid(theta - 3.0, theta + 3.0, n);

    let switching = if shift != 0.0 {
        s.switching
            .with_exit_level(eig, costs, s.switching.exit_level() + shift)?
    } else {
        s.switching
    };
    let sw = vi_residuals(eig, costs, &switching, &grid, tol)?;
    let mut failed: Vec<String> = Vec::new();
    if !sw.pass {
        failed.push("switching_vi".into());
    }
    let mut result = json!({
        "perturb_exit": shift,
        "case": to_value(&s.case.case)?,
        "switching_vi": summary(&sw)?,
    });

    let mut double_report = None;
    match &s.double {
        Ok(d) => {
            let dv = vi_residuals_double(eig, costs, d, &grid, tol)?;
            if !dv.pass {
                failed.push("double_stopping_vi".into());
            }
            result["double_stopping_vi"] = summary(&dv)?;

            let lo = d.a_star.min(theta - 2.0) - 3.0;
            let transforms = build_transforms(eig, costs, &d.exit(), lo, d.b_star + 3.0, n)?;
            let maj = majorant_oracle(
                eig,
                costs,
                d,
                &transforms,
                theta - 2.0,
                d.b_star + 1.0,
                maj_tol,
            )?;
            if !maj.pass {
                failed.push("majorant_oracle".into());
            }
            result["majorant_oracle"] = to_value(&maj)?;

            let shapes = shape_property_suite(eig, costs, d, n)?;
            for c in shapes.clauses.iter().filter(|c| !c.passed) {
                failed.push(format!("shape:{}", c.id));
            }
            result["shape_properties"] = to_value(&shapes)?;
            double_report = Some(dv);
        }
        Err(e) => {
            let skipped = format!("skipped: {e}");
            result["double_stopping_vi"] = json!(skipped);
            result["majorant_oracle"] = json!(skipped);
            result["shape_properties"] = json!(skipped);
        }
    }
    result["failed_checks"] = json!(failed);
    result["pass"] = json!(failed.is_empty());

    if let Some(p) = csv_path {
        let mut reports = vec![("switching", &sw)];
        if let Some(d) = &double_report {
            reports.push(("double_stopping", d));
        }
        write_residuals(p, &reports)?;
    }
    let failure = (!failed.is_empty()).then(|| CliError::Verification(failed.join(", ")));
    Ok(Outcome {
        result,
        seeds: Vec::new(),
        failure,
    })
}
