use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Two vectors that must live on the same grid have different lengths.
    #[error("alignment error: {what} has length {got}, expected {expected}")]
    Alignment {
        what: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),
    #[error("invalid constraint: {0}")]
    InvalidConstraint(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid linear program: {0}")]
    InvalidProgram(String),
    /// The simplex method hit its iteration limit or lost numerical control.
    #[error("numerically stalled after {iterations} iterations: {reason}")]
    NumericallyStalled { iterations: usize, reason: String },
    #[error("invalid group action: {0}")]
    InvalidGroup(String),
    #[error("generators do not generate the group: missing element {missing:?}")]
    NotGenerating { missing: Vec<usize> },
    #[error("construction failed: {0}")]
    ConstructionFailed(String),
    #[error("input error: {0}")]
    Input(String),
}

impl Error {
    /// True for failures of numerical machinery (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NumericallyStalled { .. } | Error::ConstructionFailed(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(what: &'static str, got: usize, expected: usize) -> Result<()> {
    if got != expected {
        return Err(Error::Alignment {
            what,
            got,
            expected,
        });
    }
    Ok(())
}
