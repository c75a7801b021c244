use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),

    #[error("schema error: missing required column `{column}`")]
    MissingColumn { column: String },

    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("data error: {0}")]
    Data(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("missing artifacts in {dir}: {}", missing.join(", "))]
    MissingArtifacts { dir: PathBuf, missing: Vec<String> },

    #[error("i/o error on {path}: {source}")]
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
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the CLI. `2` is left to argument-parsing errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidArgument(_) | Error::Json(_) => 3,
            Error::MissingColumn { .. }
            | Error::Parse { .. }
            | Error::Data(_)
            | Error::Csv(_)
            | Error::MissingArtifacts { .. } => 4,
            Error::Numeric(_) => 5,
            Error::Io { .. } => 6,
        }
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

pub(crate) fn numeric(msg: impl Into<String>) -> Error {
    Error::Numeric(msg.into())
}

/// Open a CSV writer; failure to create the file is an I/O error.
pub(crate) fn csv_writer(path: &std::path::Path) -> Result<csv::Writer<std::fs::File>> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}
