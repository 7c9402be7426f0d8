use std::path::PathBuf;

use thiserror::Error;

use crate::structure::AtomSelector;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("structure contains no ATOM/HETATM records")]
    EmptyStructure,

    #[error("line {line}: duplicate atom serial {serial}")]
    DuplicateSerial { serial: i64, line: usize },

    #[error("selection {0:?} matched no atoms")]
    EmptySelection(AtomSelector),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("atoms {first} and {second} coincide; Coulomb interaction is singular")]
    SingularPair { first: usize, second: usize },

    #[error("points {first} and {second} coincide")]
    DuplicatePoint { first: usize, second: usize },

    #[error(
        "Rips filtration exceeds {limit} simplices at max scale {max_scale} Å; \
         reduce the max scale or subsample the point cloud"
    )]
    Capacity { limit: usize, max_scale: f64 },

    #[error("bar ({birth}, {death}) lies outside [0, {scale}]; truncate deaths before binning")]
    BarOutOfRange { birth: f64, death: f64, scale: f64 },

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("solvation energy is zero; Born radius is undefined")]
    ZeroEnergy,

    #[error("need at least {needed} values, got {found}")]
    TooFewValues { needed: usize, found: usize },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("duplicate id {0:?}")]
    DuplicateId(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}
