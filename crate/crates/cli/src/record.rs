//! The JSON record every command writes.

use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::format::round_json;

pub const TOOL: &str = "xoutrade";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// A threshold in log-price and price units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Level {
    pub log: f64,
    pub price: f64,
}

impl Level {
    pub fn new(log: f64) -> Self {
        Self {
            log,
            price: log.exp(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct ErrorInfo {
    pub exit_code: i32,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sup_gain: Option<f64>,
}

impl From<&CliError> for ErrorInfo {
    fn from(e: &CliError) -> Self {
        let sup_gain = match e {
            CliError::Core(xoutrade_core::Error::TrivialProblem { sup_gain }) => Some(*sup_gain),
            _ => None,
        };
        Self {
            exit_code: e.exit_code(),
            message: e.to_string(),
            sup_gain,
        }
    }
}

/// What a command produced. `failure` is set when the command ran to the end
/// but the outcome should still give a nonzero exit status.
#[derive(Debug)]
pub struct Outcome {
    pub result: Value,
    pub seeds: Vec<u64>,
    pub failure: Option<CliError>,
}

impl Outcome {
    pub fn ok(result: Value) -> Self {
        Self {
            result,
            seeds: Vec::new(),
            failure: None,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct Record<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub status: &'static str,
    pub input: &'a RunConfig,
    pub seeds: &'a [u64],
    pub result: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorInfo>,
}

impl<'a> Record<'a> {
    pub fn new(command: &'a str, input: &'a RunConfig, outcome: &'a Result<Outcome>) -> Self {
        let (mut result, seeds, err) = match outcome {
            Ok(o) => (o.result.clone(), o.seeds.as_slice(), o.failure.as_ref()),
            Err(e) => (Value::Null, &[][..], Some(e)),
        };
        round_json(&mut result);
        let status = match err {
            None => "ok",
            Some(CliError::Verification(_)) => "failed",
            Some(_) => "error",
        };
        Self {
            tool: TOOL,
            version: VERSION,
            command,
            status,
            input,
            seeds,
            result,
            error: err.map(ErrorInfo::from),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s =
            serde_json::to_string_pretty(self).map_err(|e| CliError::Serialize(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }
}

/// Writes `text` to `path`, or to stdout without one.
pub fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|source| CliError::Io {
            path: p.to_path_buf(),
            source,
        }),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|source| CliError::Io {
                path: "<stdout>".into(),
                source,
            }),
    }
}

pub fn to_value<T: Serialize>(v: &T) -> Result<Value> {
    serde_json::to_value(v).map_err(|e| CliError::Serialize(e.to_string()))
}
