//! Error type shared across the crate.

use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: String,
        found: String,
    },

    #[error("time grid is not uniform at index {index} (step {found}, expected {expected})")]
    NonUniformGrid {
        index: usize,
        expected: f64,
        found: f64,
    },

    #[error("system is not asymptotically stable: eigenvalue with Re = {max_re}")]
    Unstable { max_re: f64 },

    #[error("evaluation point {point} is within the conditioning guard of eigenvalue {eigenvalue}")]
    NearSingular {
        point: Complex64,
        eigenvalue: Complex64,
    },

    #[error("spectra are not disjoint: shared eigenvalue near {value}")]
    SpectrumOverlap { value: Complex64 },

    #[error("rank deficiency in {context}: rank {rank} < required {required}")]
    RankDeficient {
        context: &'static str,
        rank: usize,
        required: usize,
    },

    #[error("matrix in {context} is ill-conditioned (condition estimate {cond:.3e} > {limit:.3e})")]
    IllConditioned {
        context: &'static str,
        cond: f64,
        limit: f64,
    },

    #[error("matrix is not in the recognised block-diagonal form at row {row}")]
    NotBlockDiagonal { row: usize },

    #[error("residual check failed in {context}: {residual:.3e} > {tolerance:.3e}")]
    ResidualTooLarge {
        context: &'static str,
        residual: f64,
        tolerance: f64,
    },

    #[error("input index {index} out of range for {inputs} inputs")]
    InputIndexOutOfRange { index: usize, inputs: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("linear solve failed in {context}")]
    SolveFailed { context: &'static str },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn stage(stage: &'static str) -> impl FnOnce(Error) -> Error {
        move |source| Error::Stage {
            stage,
            source: Box::new(source),
        }
    }

    /// Process exit class: 1 validation failure, 2 usage error, 3 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::DimensionMismatch { .. }
            | Error::NonUniformGrid { .. }
            | Error::RankDeficient { .. }
            | Error::InputIndexOutOfRange { .. }
            | Error::InvalidArgument(_)
            | Error::Io { .. }
            | Error::Parse { .. }
            | Error::Json(_) => 1,
            Error::Unstable { .. }
            | Error::NearSingular { .. }
            | Error::SpectrumOverlap { .. }
            | Error::IllConditioned { .. }
            | Error::NotBlockDiagonal { .. }
            | Error::ResidualTooLarge { .. }
            | Error::SolveFailed { .. } => 3,
            Error::Stage { source, .. } => source.exit_code(),
        }
    }
}
