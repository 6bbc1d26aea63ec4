use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated an operation's precondition (shape, finiteness, grid alignment).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("configuration error: {0}")]
    Config(String),

    /// A loss evaluator asked for something the differentiation engine cannot provide.
    #[error("unsupported by the differentiation engine: {0}")]
    Capability(String),

    #[error("training diverged at iteration {iteration}: {detail}{}",
        .last_checkpoint.as_ref().map(|p| format!(" (last checkpoint: {})", p.display())).unwrap_or_default())]
    Divergence {
        iteration: usize,
        detail: String,
        last_checkpoint: Option<PathBuf>,
    },

    /// The integrator lost probability mass beyond tolerance; the step is too large.
    #[error("integration unstable at t = {t}: probability-sum defect {defect:e}")]
    Instability { t: f64, defect: f64 },

    #[error("unknown {kind} '{name}'")]
    Lookup { kind: &'static str, name: String },

    #[error("malformed {what}: {detail}")]
    Format { what: &'static str, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Lookup { .. } | Error::Contract(_) | Error::Capability(_) => 2,
            Error::Divergence { .. } | Error::Instability { .. } => 3,
            Error::Io(_) | Error::Format { .. } => 4,
        }
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            other => Error::Format {
                what: "csv",
                detail: format!("{other:?}"),
            },
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        if e.is_io() {
            Error::Io(e.into())
        } else {
            Error::Format {
                what: "json",
                detail: e.to_string(),
            }
        }
    }
}
