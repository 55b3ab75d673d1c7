use thiserror::Error;

/// Errors raised by the simulation, coding and solver layers.
#[derive(Debug, Error)]
pub enum LabError {
    /// A caller-supplied parameter is out of its admissible range.
    #[error("invalid parameter: {0}")]
    Parameter(String),
    /// Input data violates a structural precondition (ordering, lengths).
    #[error("invalid input: {0}")]
    Input(String),
    /// A numerical routine failed to produce a trustworthy result.
    #[error("numerical failure: {0}")]
    Numerical(String),
    /// A probability grid could not hold the requested distribution.
    #[error("pdf grid overflow: {mass_outside:.3e} mass outside support")]
    GridOverflow { mass_outside: f64 },
    /// A replication of a Monte Carlo run failed.
    #[error("replication {index} failed: {source}")]
    Replication {
        index: usize,
        #[source]
        source: Box<LabError>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, LabError>;

pub(crate) fn param(msg: impl Into<String>) -> LabError {
    LabError::Parameter(msg.into())
}

pub(crate) fn ensure_positive(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(param(format!("{name} must be positive and finite, got {value}")))
    }
}
