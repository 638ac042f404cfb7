use std::path::PathBuf;

use thiserror::Error;

/// Every failure the library can report.
///
/// The variants split into three families that the command line maps onto
/// distinct exit codes: configuration mistakes, scientific breakdowns of a
/// run, and file-system trouble.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch between operands")]
    GridMismatch,

    #[error("non-finite sample produced by {0}")]
    NonFinite(&'static str),

    #[error("chord-arc condition violated: {0}")]
    ChordArc(String),

    #[error("projection solve did not converge after {iterations} iterations (increment {increment:.3e}, residual {residual:.3e})")]
    SolverDiverged {
        iterations: usize,
        increment: f64,
        residual: f64,
    },

    #[error("Taylor sign violated: min A = {0:.6e}")]
    TaylorSign(f64),

    #[error("constraint ceiling exceeded: residual {residual:.3e} > ceiling {ceiling:.3e}")]
    ConstraintCeiling { residual: f64, ceiling: f64 },

    #[error("singular integral of power {power} with {numerators} numerators is not integrable")]
    NotIntegrable { power: u32, numerators: usize },

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.into(),
        }
    }

    /// True for failures that signal the simulated physics or numerics left
    /// their admissible regime, as opposed to bad input.
    pub fn is_scientific(&self) -> bool {
        matches!(
            self,
            Error::NonFinite(_)
                | Error::ChordArc(_)
                | Error::SolverDiverged { .. }
                | Error::TaylorSign(_)
                | Error::ConstraintCeiling { .. }
                | Error::Quadrature(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
