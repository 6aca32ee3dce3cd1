use thiserror::Error;

/// Errors raised by the measure, projection, spectral, transform and union operations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {what}: expected {expected}, got {got}")]
    ShapeMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// A construction would produce more atoms than the configured budget allows.
    #[error("atom budget exceeded: {requested} atoms requested, budget is {budget}")]
    BudgetExceeded { requested: u128, budget: usize },

    #[error("underdetermined fit: need at least {needed} points, got {got}")]
    Underdetermined { needed: usize, got: usize },

    #[error("degenerate probe: {0}")]
    Degenerate(String),

    /// A scale or frequency lies outside the range the discrete approximation resolves.
    #[error("outside valid scale window: {0}")]
    OutsideWindow(String),

    /// An input lies outside the domain an operation is defined on.
    #[error("domain violation: {0}")]
    Domain(String),

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn shape(what: &'static str, expected: usize, got: usize) -> Self {
        Error::ShapeMismatch {
            what,
            expected,
            got,
        }
    }

    /// True for errors that signal resource exhaustion rather than bad input.
    pub fn is_budget(&self) -> bool {
        matches!(self, Error::BudgetExceeded { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
