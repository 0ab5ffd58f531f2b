mod calibrate;
mod simulate;
mod solve;
mod sweep;
mod verify;

pub use calibrate::calibrate;
pub use simulate::simulate;
pub use solve::{solve, solve_both, Solved};
pub use sweep::{sweep, SweepRow, SWEEP_COLUMNS};
pub use verify::verify;

use std::path::Path;

use crate::error::{CliError, Result};

pub(crate) fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|e| csv_error(path, e))
}

pub(crate) fn csv_error(path: &Path, e: csv::Error) -> CliError {
    CliError::Data {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}
