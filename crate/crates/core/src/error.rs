use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Document could not be parsed (bad syntax or unknown key).
    #[error("parse error{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Parse {
        line: Option<usize>,
        message: String,
    },

    /// A value violates an invariant; `path` names the offending field.
    #[error("invalid configuration at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("unknown drone `{0}`")]
    UnknownDrone(String),

    #[error("drone `{drone}` has no {capability}")]
    MissingCapability {
        drone: String,
        capability: &'static str,
    },

    #[error("payload of {len} bytes exceeds the {max}-byte limit")]
    PayloadTooLarge { len: usize, max: usize },

    #[error("value out of domain: {0}")]
    Domain(String),

    #[error("underdetermined fit: need at least 4 distinct sample times, got {distinct}")]
    Underdetermined { distinct: usize },

    #[error("discharge curve is not strictly decreasing on [{from:.6}, {to:.6}] s")]
    NonMonotone { from: f64, to: f64 },

    #[error("invalid battery model: {0}")]
    Battery(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("empty series")]
    Empty,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}
