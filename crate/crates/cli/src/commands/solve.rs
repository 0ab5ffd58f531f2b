use serde_json::{json, Value};
use xoutrade_core::double_stopping;
use xoutrade_core::model::landmarks;
use xoutrade_core::switching::solve_switching;
use xoutrade_core::{
    CaseReport, Costs, DoubleStoppingSolution, Eigenfunctions, ModelLandmarks, SwitchingSolution,
};

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::record::{to_value, Level, Outcome};

/// Both problems solved for one configuration. The single-round-trip
/// problem may be trivial while repeated trading still has an answer.
pub struct Solved {
    pub eig: Eigenfunctions,
    pub costs: Costs,
    pub landmarks: ModelLandmarks,
    pub double: std::result::Result<DoubleStoppingSolution, xoutrade_core::Error>,
    pub switching: SwitchingSolution,
    pub case: CaseReport,
}

pub fn solve_both(cfg: &RunConfig) -> Result<Solved> {
    let eig = cfg.eigenfunctions()?;
    let costs = cfg.costs()?;
    let landmarks = landmarks(eig.params(), &costs)?;
    let double = double_stopping::solve(&eig, &costs);
    if let Err(e) = &double {
        if !matches!(e, xoutrade_core::Error::TrivialProblem { .. }) {
            return Err(e.clone().into());
        }
    }
    let (switching, case) = solve_switching(&eig, &costs)?;
    Ok(Solved {
        eig,
        costs,
        landmarks,
        double,
        switching,
        case,
    })
}

pub(crate) fn double_json(sol: &DoubleStoppingSolution) -> Result<Value> {
    Ok(json!({
        "b_star": Level::new(sol.b_star),
        "d_star": Level::new(sol.d_star),
        "a_star": Level::new(sol.a_star),
        "coef_below": sol.coef_below,
        "coef_above": sol.coef_above,
        "diagnostics": to_value(&sol.diagnostics)?,
    }))
}

pub(crate) fn switching_json(sol: &SwitchingSolution, case: &CaseReport) -> Result<Value> {
    let mut v = json!({
        "case": to_value(&case.case)?,
        "b_tilde": Level::new(sol.exit_level()),
        "solution": to_value(sol)?,
        "classification": to_value(case)?,
    });
    if let Some((lo, hi)) = sol.entry_interval() {
        v["a_tilde"] = to_value(&Level::new(lo))?;
        v["d_tilde"] = to_value(&Level::new(hi))?;
    }
    Ok(v)
}

pub fn solve(cfg: &RunConfig) -> Result<Outcome> {
    let s = solve_both(cfg)?;
    let (double, failure) = match &s.double {
        Ok(d) => (double_json(d)?, None),
        Err(e) => (
            json!({ "error": e.to_string() }),
            Some(CliError::Core(e.clone())),
        ),
    };
    let result = json!({
        "landmarks": to_value(&s.landmarks)?,
        "double_stopping": double,
        "switching": switching_json(&s.switching, &s.case)?,
    });
    Ok(Outcome {
        result,
        seeds: Vec::new(),
        failure,
    })
}
