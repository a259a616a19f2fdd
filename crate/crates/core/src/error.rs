use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SlpError {
    #[error("{what} must be at least 1")]
    ZeroDimension { what: &'static str },

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("symbol {index} has modulus {modulus}, expected 1")]
    NonUnitSymbol { index: usize, modulus: f64 },

    #[error("stacked vector has odd length {0}")]
    OddLength(usize),

    #[error("invalid parameter {name} = {value}")]
    InvalidParameter { name: &'static str, value: f64 },

    #[error("leading cubic coefficient is zero")]
    DegenerateCubic,

    #[error("no root inside ({lower}, {upper}); real roots {roots:?}")]
    NoInteriorRoot {
        roots: Vec<f64>,
        lower: f64,
        upper: f64,
    },

    #[error("hyperslab bounds infeasible: a = {a}, b = {b}")]
    InfeasibleBounds { a: f64, b: f64 },

    #[error("robust slack slope {alpha} is not positive for constraint {constraint}")]
    InfeasibleRay { constraint: usize, alpha: f64 },

    #[error("singular linear system in {context}")]
    Singular { context: &'static str },

    #[error("unknown scheme `{0}`")]
    UnknownScheme(String),

    #[error("invalid file format: {0}")]
    Format(String),

    #[error("non-finite {what} at batch {batch}")]
    NonFinite { what: &'static str, batch: usize },

    #[error("block {block}: {source}")]
    Block {
        block: usize,
        #[source]
        source: Box<SlpError>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, SlpError>;

impl SlpError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        SlpError::Io {
            path: path.into(),
            source,
        }
    }
}
