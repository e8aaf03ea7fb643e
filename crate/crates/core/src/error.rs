use thiserror::Error;

/// Failure modes shared by every simulator module.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("degenerate channel: {0}")]
    DegenerateChannel(&'static str),
    #[error("ill-conditioned channels: condition number {condition:.3e} exceeds {limit:.1e}")]
    IllConditioned { condition: f64, limit: f64 },
    #[error("distance {distance} m is below the far-field bound {bound} m")]
    OutOfModelRange { distance: f64, bound: f64 },
    #[error("unsupported: {0}")]
    Unsupported(&'static str),
    #[error("malformed record at line {line}: {reason}")]
    Record { line: usize, reason: String },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
