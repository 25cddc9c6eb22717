use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A point of the inflated domain has no preimage in the base domain.
    #[error("empty perturbation neighborhood at {point:?}")]
    EmptyNeighborhood { point: Vec<f64> },

    /// A local fitting window holds too few observations even after widening.
    #[error("insufficient data: window at {point:?} holds {found} point(s), need {needed}{}", seed_suffix(*.seed))]
    InsufficientData {
        point: Vec<f64>,
        found: usize,
        needed: usize,
        seed: Option<u64>,
    },

    #[error("non-positive risk {value} at index {index}; log-log fit undefined")]
    NonPositiveRisk { index: usize, value: f64 },

    #[error("need at least {needed} points for a rate fit, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error on {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

fn seed_suffix(seed: Option<u64>) -> String {
    match seed {
        Some(s) => format!(" (reproduce with seed {s})"),
        None => String::new(),
    }
}

impl Error {
    /// Attach the replicate seed to an `InsufficientData` error.
    pub fn with_seed(self, seed: u64) -> Self {
        match self {
            Error::InsufficientData {
                point,
                found,
                needed,
                ..
            } => Error::InsufficientData {
                point,
                found,
                needed,
                seed: Some(seed),
            },
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
