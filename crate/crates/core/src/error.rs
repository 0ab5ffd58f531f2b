use thiserror::Error;

/// Errors raised by the solvers and their supporting numerics.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input `{field}`: {reason}")]
    InvalidInput { field: &'static str, reason: String },

    #[error(
        "{what}: no convergence after {iterations} iterations \
         (bracket [{lo}, {hi}], f(lo) = {f_lo:e}, f(hi) = {f_hi:e})"
    )]
    SolverFailure {
        what: &'static str,
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
        iterations: usize,
    },

    #[error("{what}: could not bracket a sign change starting from {start} (last probe {last})")]
    BracketFailure {
        what: &'static str,
        start: f64,
        last: f64,
    },

    #[error("eigenfunctions are not representable at x = {x} even in log scale")]
    OutOfRange { x: f64 },

    #[error(
        "quadrature did not converge: estimate {estimate:e}, error estimate {error_estimate:e}"
    )]
    QuadratureFailure { estimate: f64, error_estimate: f64 },

    /// `sup (V - h_b) <= 0`: entering the market is never worthwhile.
    #[error("trivial entry problem: sup(V - h_b) = {sup_gain:e} <= 0, the investor never enters")]
    TrivialProblem { sup_gain: f64 },

    #[error("calibration: {0}")]
    Calibration(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidInput {
        field,
        reason: reason.into(),
    }
}
