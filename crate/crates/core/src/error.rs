use thiserror::Error;

use crate::tomo::MleFit;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("zero-state: all amplitudes vanish")]
    ZeroState,

    #[error("bad-weights: {0}")]
    BadWeights(String),

    #[error("{name} = {value} is outside {range}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },

    #[error("invalid splitter: {0}")]
    InvalidSplitter(String),

    #[error("unphysical density matrix: {0}")]
    Unphysical(String),

    #[error("division by zero: {0}")]
    DivisionByZero(&'static str),

    #[error("unidentifiable: {0}")]
    Unidentifiable(String),

    #[error("dependent-angle-sets: design matrix is singular (condition number {condition:.3e})")]
    DependentAngleSets { condition: f64 },

    #[error("consistency: {0}")]
    Consistency(String),

    #[error("empty-subspace: corner population P = {0:.3e} leaves the filtered state undefined")]
    EmptySubspace(f64),

    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("no-convergence after {restarts} restarts (best objective {:.6e})", best.objective)]
    NoConvergence { restarts: usize, best: Box<MleFit> },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: String,
        line: u64,
        column: u64,
        message: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn range(name: &'static str, value: f64, range: &'static str) -> Self {
        Error::OutOfRange { name, value, range }
    }

    /// True for failures of the numerics rather than of the caller's input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Unphysical(_)
                | Error::DivisionByZero(_)
                | Error::Unidentifiable(_)
                | Error::DependentAngleSets { .. }
                | Error::EmptySubspace(_)
                | Error::NoConvergence { .. }
        )
    }
}
