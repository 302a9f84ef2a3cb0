use thiserror::Error;

/// Errors raised by the map, operator, and experiment layers.
#[derive(Debug, Error)]
pub enum Error {
    /// A point or parameter lies outside the domain an operation accepts.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    /// A representation outgrew its configured cap.
    #[error("resource limit exceeded: {what} (cap {cap})")]
    Resource { what: String, cap: usize },

    #[error("unsupported representation: {0}")]
    Unsupported(String),

    /// The pushforward density fell below the level a division needs.
    #[error("minoration failure: {0}")]
    Minoration(String),

    /// Every violated configuration field, reported together.
    #[error("invalid configuration: {}", .0.join("; "))]
    Validation(Vec<String>),

    #[error("config parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serialize(String),
}

impl Error {
    /// Stable machine-readable class name used by the CLI.
    pub fn class(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Argument(_) => "argument",
            Error::Resource { .. } => "resource",
            Error::Unsupported(_) => "unsupported",
            Error::Minoration(_) => "minoration",
            Error::Validation(_) => "validation",
            Error::Parse(_) => "parse",
            Error::Io(_) => "io",
            Error::Serialize(_) => "serialize",
        }
    }

    /// Process exit code for the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation(_) | Error::Parse(_) => 2,
            Error::Resource { .. } => 3,
            Error::Minoration(_) => 4,
            Error::Io(_) | Error::Serialize(_) => 5,
            Error::Domain(_) | Error::Argument(_) | Error::Unsupported(_) => 6,
        }
    }

    pub(crate) fn resource(what: impl Into<String>, cap: usize) -> Self {
        Error::Resource {
            what: what.into(),
            cap,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
