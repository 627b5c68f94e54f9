use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Caller error: bad arguments, inconsistent configuration, malformed input.
    #[error("usage: {0}")]
    Usage(String),

    /// Two fields bound to different grids were combined.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// Non-finite values appeared where the contract requires finite ones.
    #[error("numeric: {0}")]
    Numeric(String),

    /// Iterative solver ran out of budget; carries the last residual seen.
    #[error("no convergence after {iterations} iterations, residual {residual:.3e}")]
    Convergence { iterations: usize, residual: f64 },

    /// Solver collapsed onto the zero field.
    #[error("degenerate solution: {0}")]
    Degenerate(String),

    /// A required input artifact does not exist.
    #[error("missing artifact: {}", .0.display())]
    MissingArtifact(PathBuf),

    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    pub fn parse(context: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            context: context.into(),
            message: message.into(),
        }
    }
}
