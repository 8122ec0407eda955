use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Which placement constraint an antenna position vector violates.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// `x_1 >= 0`
    BelowAperture {
        first: f64,
    },
    /// `x_N <= L`
    AboveAperture {
        last: f64,
        aperture: f64,
    },
    /// `x_n - x_{n-1} >= L0` (index is the 0-based `n`)
    Spacing {
        index: usize,
        gap: f64,
        min_spacing: f64,
    },
    WrongCount {
        expected: usize,
        got: usize,
    },
    NotFinite {
        index: usize,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::BelowAperture { first } => {
                write!(
                    f,
                    "first antenna at {first} lies below the aperture start (x_1 >= 0)"
                )
            }
            Violation::AboveAperture { last, aperture } => write!(
                f,
                "last antenna at {last} lies beyond the aperture end {aperture} (x_N <= L)"
            ),
            Violation::Spacing {
                index,
                gap,
                min_spacing,
            } => write!(
                f,
                "antennas {} and {} are {gap} apart, below the minimum spacing {min_spacing}",
                index - 1,
                index
            ),
            Violation::WrongCount { expected, got } => {
                write!(f, "expected {expected} antenna positions, got {got}")
            }
            Violation::NotFinite { index } => write!(f, "position {index} is not finite"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("infeasible antenna positions: {0}")]
    Infeasible(Violation),

    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("barrier undefined: {0}")]
    Domain(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {message}", path.display())]
    Parse { path: PathBuf, message: String },

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// The innermost error, skipping any context wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            other => other,
        }
    }
}

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            what,
            expected,
            got,
        })
    }
}
