use thiserror::Error;

/// Errors raised by the library. Each variant names the operation that failed
/// so that failures surfacing through the CLI can be traced back to a module
/// contract.
#[derive(Debug, Error)]
pub enum Error {
    /// An input violated an operation's precondition.
    #[error("{op}: precondition violated: {detail}")]
    Precondition { op: &'static str, detail: String },

    /// A numerical routine could not produce a trustworthy value.
    #[error("{op}: numerical failure: {detail}")]
    Numerical { op: &'static str, detail: String },

    /// Fixed-point iteration did not converge.
    #[error("{op}: did not converge: {detail}")]
    NotConverged { op: &'static str, detail: String },

    /// Configuration file problems; every violation found is listed.
    #[error("configuration invalid:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),

    #[error("expression error: {0}")]
    Expr(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn pre(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Precondition {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn num(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Numerical {
            op,
            detail: detail.into(),
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Expr(_) => 2,
            Error::Precondition { .. } => 3,
            Error::Numerical { .. } => 4,
            Error::NotConverged { .. } => 5,
            Error::Io { .. } | Error::Json(_) => 6,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
