use std::fmt;

use thiserror::Error;

/// A single violated invariant, addressed by the path of the offending field.
#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub field: String,
    pub reason: String,
}

impl Violation {
    pub fn new(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Self { field: field.into(), reason: reason.into() }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.reason)
    }
}

fn join(violations: &[Violation]) -> String {
    violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter ({})", join(.0))]
    InvalidParameter(Vec<Violation>),

    #[error("series or truncation did not converge: {0}")]
    NonConvergence(String),

    #[error("linear system is singular or ill-conditioned: {0}")]
    SingularSystem(String),

    #[error("time step too large: {0}")]
    StepSizeTooLarge(String),

    #[error("no periodic steady state reached: {0}")]
    NonStationary(String),

    #[error("system with {0} emitters exceeds the supported dimension (max {1})")]
    DimensionTooLarge(usize, usize),

    #[error("density matrix lost positivity: {0}")]
    PositivityLost(String),

    #[error("undefined result: {0}")]
    Undefined(String),

    #[error("amplitude {0:e} too small for a meaningful phase")]
    AmplitudeTooSmall(f64),

    #[error("frequency grids do not match: {0}")]
    GridMismatch(String),

    #[error("background transmission is zero at index {0}")]
    ZeroBackground(usize),

    #[error("fit diverged: {0}")]
    FitDiverged(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("malformed input: {0}")]
    Parse(String),
}

impl Error {
    pub fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter(vec![Violation::new(field, reason)])
    }

    /// Field paths of every violation, empty for other error kinds.
    pub fn fields(&self) -> Vec<&str> {
        match self {
            Error::InvalidParameter(v) => v.iter().map(|v| v.field.as_str()).collect(),
            _ => Vec::new(),
        }
    }

    /// True for errors caused by the caller's input rather than by a solver.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter(_)
                | Error::Parse(_)
                | Error::GridMismatch(_)
                | Error::DegenerateInput(_)
                | Error::DimensionTooLarge(..)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
