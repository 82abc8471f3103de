use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("data error: negative entry {value} at ({row}, {col})")]
    Negative { row: usize, col: usize, value: f64 },

    #[error("data error: {0}")]
    Data(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("rotation too large: entry {value:e} at ({row}, {col}) is below -{tol:e}")]
    RotationTooLarge {
        row: usize,
        col: usize,
        value: f64,
        tol: f64,
    },

    #[error("degenerate block: cluster {cluster} has {observed} observed entries over {rows} rows")]
    DegenerateBlock {
        cluster: usize,
        rows: usize,
        observed: usize,
    },

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

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by the input data rather than by parameters.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Negative { .. }
                | Error::Data(_)
                | Error::Dimension(_)
                | Error::Degenerate(_)
                | Error::DegenerateBlock { .. }
                | Error::Csv { .. }
        )
    }
}
