use thiserror::Error;

/// Errors raised by the simulator and benchmarking pipelines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("eigensolver did not converge: {0}")]
    Convergence(String),

    #[error("numerical integrity check failed: {what} (max violation {violation:e})")]
    Integrity { what: String, violation: f64 },

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("invalid schedule: {0}")]
    Schedule(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn integrity(what: impl Into<String>, violation: f64) -> Self {
        Error::Integrity {
            what: what.into(),
            violation,
        }
    }

    /// True for failures that indicate a broken numerical invariant (CPTP, fits).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Integrity { .. } | Error::Convergence(_) | Error::Fit(_) | Error::Calibration(_)
        )
    }
}
