use thiserror::Error;

/// Errors raised by the simulator and its I/O surfaces.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("degenerate channel: LOS component has zero norm")]
    DegenerateChannel,

    #[error("insufficient energy: spend of {required} J requested with {available} J stored")]
    InsufficientEnergy { required: f64, available: f64 },

    #[error("invalid request: {0}")]
    InvalidRequest(String),

    #[error("replica pmf undefined for an empty history")]
    UndefinedPmf,

    #[error("no feasible action to select from")]
    EmptyFeasibleSet,

    #[error("aggregate undefined: {0}")]
    UndefinedAggregate(String),

    #[error("config line {line}: key `{key}`: {reason}")]
    Config {
        line: usize,
        key: String,
        reason: String,
    },

    #[error("malformed {what}: {reason}")]
    Parse { what: &'static str, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
