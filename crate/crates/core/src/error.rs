use thiserror::Error;

/// Errors raised by the imaging pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument fell outside the domain an operation is defined on.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Quadrature did not reach the requested tolerance.
    #[error("quadrature did not converge at k = {wavenumber}: residual {residual:e} after {panels} panels")]
    Quadrature {
        wavenumber: f64,
        residual: f64,
        panels: usize,
    },

    #[error("diagonalization failed in {mode} mode: {reason}")]
    Diagonalization { mode: &'static str, reason: String },

    /// Inputs are individually well formed but inconsistent with each other.
    #[error("validation error: {0}")]
    Validation(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Quadrature { .. } | Error::Diagonalization { .. } => 3,
            Error::Io { .. } => 1,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
