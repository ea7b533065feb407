use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter or file violates a model invariant. `field` is a dotted path
    /// such as `srcs[2].alpha`.
    #[error("invalid {field}: {reason}")]
    Validation { field: String, reason: String },

    /// An exhaustive enumeration would exceed its configured cap.
    #[error("{what} for {context} would visit {projected} items, above the cap of {cap}")]
    Resource {
        what: &'static str,
        context: String,
        projected: u128,
        cap: u128,
    },

    /// Best-response dynamics revisited a profile or ran past its step cap.
    #[error("best-response dynamics failed: {0}")]
    BrdCycle(String),

    #[error("cannot parse {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serialize(String),
}

impl Error {
    pub(crate) fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Replaces the context of a resource error, e.g. with a scenario name.
    pub fn with_context(self, name: &str) -> Self {
        match self {
            Error::Resource {
                what,
                projected,
                cap,
                ..
            } => Error::Resource {
                what,
                context: name.to_string(),
                projected,
                cap,
            },
            other => other,
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Resource { .. } => 2,
            _ => 1,
        }
    }
}
