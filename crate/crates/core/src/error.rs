use thiserror::Error;

/// Errors raised by the harmonic, needlet and estimation routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("degree {degree} is ill-conditioned (condition number {condition:.3e})")]
    IllConditioned { degree: usize, condition: f64 },

    #[error("degree {0} has no inverse block available")]
    MissingDegree(usize),

    #[error("noise model {0} cannot be sampled")]
    UnsupportedSampling(String),

    #[error("empty sample")]
    EmptySample,

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for the error's category.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::UnsupportedSampling(_) => 2,
            Error::Parse { .. } | Error::Csv(_) | Error::Json(_) => 3,
            Error::Domain(_)
            | Error::Precondition(_)
            | Error::IndexOutOfRange(_)
            | Error::IllConditioned { .. }
            | Error::MissingDegree(_)
            | Error::EmptySample => 4,
            Error::Io(_) => 5,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
