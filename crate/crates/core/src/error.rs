use thiserror::Error;

/// Coarse classification used by the command-line front end to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Config,
    Data,
    Numeric,
    Validity,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("parse error at row {row}: {msg}")]
    Parse { row: usize, msg: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("duplicate site id `{0}`")]
    DuplicateId(String),

    #[error("horizon coverage error for site `{site}`: {msg}")]
    Coverage { site: String, msg: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("lookup error: {0}")]
    Lookup(String),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("degenerate model: {0}")]
    DegenerateModel(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("variogram fit failed: {0}")]
    FitFailed(String),

    #[error("winsorizing failed: {0}")]
    WinsorizeFailed(String),

    #[error("model file error: {0}")]
    ModelFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Config(_) | Error::Lookup(_) => ErrorCategory::Config,
            Error::Schema(_)
            | Error::Parse { .. }
            | Error::Validation(_)
            | Error::DuplicateId(_)
            | Error::Coverage { .. }
            | Error::Domain(_)
            | Error::ModelFormat(_)
            | Error::Io(_)
            | Error::Csv(_) => ErrorCategory::Data,
            Error::DegenerateGeometry(_)
            | Error::DegenerateModel(_)
            | Error::Numeric(_)
            | Error::FitFailed(_) => ErrorCategory::Numeric,
            Error::WinsorizeFailed(_) => ErrorCategory::Validity,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
