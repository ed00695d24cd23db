use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("unknown name: {0}")]
    Lookup(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("linear solve failed (condition estimate {cond:.3e}): {context}")]
    Solver { cond: f64, context: String },

    #[error("degenerate steering vector: {0}")]
    Degenerate(String),

    #[error("singular configuration: {0}")]
    Singularity(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("iteration failed at step {iter}: {msg}")]
    Iteration {
        iter: usize,
        msg: String,
        last_coeffs: Vec<f64>,
        last_residual: f64,
    },
}

impl Error {
    /// Process exit code: 2 for input problems, 3 for numeric failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Lookup(_) | Error::Parse { .. } | Error::Io(_) => 2,
            _ => 3,
        }
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
