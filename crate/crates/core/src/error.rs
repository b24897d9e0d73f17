use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("raster transforms do not match (co-registration required)")]
    TransformMismatch,
    #[error("cell shape {got} does not match transform {expected}")]
    ShapeMismatch { expected: String, got: String },
    #[error("invalid geotransform: {0}")]
    BadTransform(String),
    #[error("non-positive cell value {value} at (row {row}, col {col})")]
    NonPositiveCell { row: usize, col: usize, value: f64 },
    #[error("raster stack is empty")]
    EmptyStack,
    #[error("kernel size {0} must be odd and >= 3")]
    BadKernel(usize),

    #[error("drainage mask has no drainage cells")]
    NoDrainage,

    #[error("reference region for {channel} has {got} usable cells, need at least {need}")]
    ReferenceTooSmall {
        channel: &'static str,
        got: usize,
        need: usize,
    },
    #[error("degenerate likelihood model: {0}")]
    DegenerateModel(String),
    #[error("invalid detection config: {0}")]
    BadConfig(String),

    #[error("flood mask has no flooded cells")]
    EmptyMask,
    #[error("flood boundary is empty")]
    EmptyBoundary,
    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { need: usize, got: usize },
    #[error("variogram fit failed: {0}")]
    FitFailure(String),
    #[error("invalid variogram parameters: {0}")]
    BadVariogram(String),
    #[error("kriging system is singular")]
    SingularSystem,
    #[error("invalid Monte Carlo parameters: {0}")]
    BadMonteCarlo(String),

    #[error("footprint of {0} lies outside the raster extent")]
    FootprintOutsideRaster(String),
    #[error("decay length lambda must be > 0, got {0}")]
    BadLambda(f64),
    #[error("invalid damage curve: {0}")]
    BadCurve(String),

    #[error("tier boundaries must satisfy 0 < t2 < t1 < 1 and c3_min in [0,1]")]
    BadBoundaries,
    #[error("cutoff k={k} outside [0, {n}]")]
    BadCutoff { k: usize, n: usize },
    #[error("ground-truth high-severity set is empty")]
    EmptyTruth,

    #[error("invalid scenario spec: {0}")]
    BadSpec(String),
    #[error("pipeline output does not match scenario: {0}")]
    ScenarioMismatch(String),

    #[error("parse error in {source_name} at {location}: {message}")]
    Parse {
        source_name: String,
        location: String,
        message: String,
    },
    #[error("unsupported or mismatched file format: {0}")]
    FormatMismatch(String),
    #[error("invalid geometry: {0}")]
    Geometry(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(
        source_name: impl Into<String>,
        location: impl Into<String>,
        message: impl Into<String>,
    ) -> Self {
        Error::Parse {
            source_name: source_name.into(),
            location: location.into(),
            message: message.into(),
        }
    }
}
