use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected ambient dimension {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("point set has {found} points, need at least {required}")]
    TooFewPoints { required: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("{path}:{line}: row norm {norm} deviates from 1 by more than 1e-3")]
    NotOnSphere {
        path: PathBuf,
        line: usize,
        norm: f64,
    },

    #[error("duplicate input points at indices {first} and {second}")]
    DuplicatePoints { first: usize, second: usize },

    #[error("harmonic dimension Z({d}, {k}) overflows u64")]
    Overflow { d: usize, k: usize },

    #[error("block {block} failed to fit: {source}")]
    BlockFit {
        block: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("linear algebra failure: {0}")]
    Numerical(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("missing design file for t = {t} in {dir}")]
    MissingDesign { t: usize, dir: PathBuf },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
