use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("singular matrix: zero pivot at index {pivot}")]
    Singular { pivot: usize },

    #[error("solve residual {residual:e} exceeds tolerance {tol:e} ({context})")]
    Residual {
        context: &'static str,
        residual: f64,
        tol: f64,
    },

    #[error("matrix condition estimate {cond:e} exceeds {limit:e}")]
    IllConditioned { cond: f64, limit: f64 },

    #[error("invalid range: {0}")]
    InvalidRange(String),

    #[error("non-finite value encountered at step {step}")]
    NonFinite { step: usize },

    #[error("time grid mismatch: {0}")]
    TimeGrid(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("artifact error: {0}")]
    Artifact(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of the numerical machinery (as opposed to bad input or I/O).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Singular { .. }
                | Error::Residual { .. }
                | Error::IllConditioned { .. }
                | Error::NonFinite { .. }
        )
    }
}
