use thiserror::Error;

/// Errors raised by the distribution, recursion and sampling routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A parameter lies outside the domain of the requested law or operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// An iterative procedure did not meet its stopping rule within its cap.
    #[error("{what} did not converge within {iterations} iterations")]
    Divergence { what: &'static str, iterations: usize },

    /// A table, grid or enumeration would exceed its configured size budget.
    #[error("{what} needs {requested} entries, budget is {budget}")]
    BudgetExceeded {
        what: &'static str,
        requested: u128,
        budget: u128,
    },

    /// Read outside the computed triangle of a recursion grid.
    #[error("grid entry (j={j}, i={i}, n={n}) lies outside the computed region")]
    OutOfGrid { j: usize, i: usize, n: usize },

    /// The certified truncation error exceeds the requested accuracy.
    #[error("tail bound {bound:e} exceeds requested accuracy {tolerance:e}")]
    TailTooLarge { bound: f64, tolerance: f64 },

    /// A branching simulation exceeded its accumulated-individual cap.
    #[error("branching draw exceeded the cap of {cap} individuals")]
    GenerationCap { cap: u64 },

    /// Malformed severity input.
    #[error("severity input, line {line}: {message}")]
    SeverityFormat { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

/// Validate that `x` is a finite real in the closed interval.
pub(crate) fn check_closed(name: &str, x: f64, lo: f64, hi: f64) -> Result<()> {
    if x.is_finite() && x >= lo && x <= hi {
        Ok(())
    } else {
        Err(domain(format!("{name} must lie in [{lo}, {hi}], got {x}")))
    }
}

/// Validate that `x` lies in the open interval.
pub(crate) fn check_open(name: &str, x: f64, lo: f64, hi: f64) -> Result<()> {
    if x.is_finite() && x > lo && x < hi {
        Ok(())
    } else {
        Err(domain(format!("{name} must lie in ({lo}, {hi}), got {x}")))
    }
}

/// Validate the half-open interval `(lo, hi]`.
pub(crate) fn check_left_open(name: &str, x: f64, lo: f64, hi: f64) -> Result<()> {
    if x.is_finite() && x > lo && x <= hi {
        Ok(())
    } else {
        Err(domain(format!("{name} must lie in ({lo}, {hi}], got {x}")))
    }
}

pub(crate) fn check_nonnegative(name: &str, x: f64) -> Result<()> {
    if x.is_finite() && x >= 0.0 {
        Ok(())
    } else {
        Err(domain(format!("{name} must be a finite value >= 0, got {x}")))
    }
}
