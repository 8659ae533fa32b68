use std::path::PathBuf;

use num_complex::Complex64;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("operands are defined on different grids")]
    GridMismatch,

    #[error("symbol ratio is undefined because x1 is zero")]
    UndefinedRatio,

    #[error("state keys do not match: {0}")]
    KeyMismatch(String),

    #[error("missing antenna state {0}")]
    MissingState(String),

    #[error("ratio {0} is not a member of the ratio set")]
    RatioNotInSet(Complex64),

    #[error("EVM denominator vanishes at grid point {0}")]
    DegenerateAngle(usize),

    #[error("basis pattern {0} carries no power")]
    DegenerateBasis(usize),

    #[error("angle outside grid coverage: theta={theta} rad, phi={phi} rad")]
    AngleOutOfRange { theta: f64, phi: f64 },

    #[error("channel matrix is singular or ill-conditioned (condition number {0:e})")]
    IllConditioned(f64),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("{path}: line {line}: {message}")]
    Parse { path: PathBuf, line: u64, message: String },

    #[error("{path}: missing column `{column}`")]
    MissingColumn { path: PathBuf, column: String },

    #[error("{path}: irregular grid: {message}")]
    IrregularGrid { path: PathBuf, message: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("thread pool: {0}")]
    ThreadPool(String),
}

impl Error {
    /// True for failures caused by user input (files, configuration, arguments)
    /// rather than by a degenerate computation.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidArgument(_)
                | Error::Parse { .. }
                | Error::MissingColumn { .. }
                | Error::IrregularGrid { .. }
                | Error::Config(_)
                | Error::Io { .. }
                | Error::Json { .. }
                | Error::Csv { .. }
                | Error::KeyMismatch(_)
                | Error::MissingState(_)
                | Error::AngleOutOfRange { .. }
        )
    }
}
