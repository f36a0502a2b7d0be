use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: malformed record: {reason}")]
    MalformedLine { line: usize, reason: String },

    #[error("trace contains no usable records")]
    EmptyTrace,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("sensor index {0} does not fit in a 3-byte identity")]
    IdentityOverflow(u64),

    #[error("sensor {0} is not known to this trace")]
    UnknownSensor(String),

    #[error("sensor index {0} is not wired to this smart object")]
    UnregisteredSensor(usize),

    #[error("no AI instance for action {0:?}")]
    UnknownAction(String),

    #[error("daily energy consumption is zero; battery lifetime is undefined")]
    ZeroConsumption,

    #[error("baseline is zero; savings are undefined")]
    ZeroBaseline,

    #[error("runs cover different spans ({baseline} vs {candidate} seconds)")]
    MismatchedSpan { baseline: i64, candidate: i64 },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
