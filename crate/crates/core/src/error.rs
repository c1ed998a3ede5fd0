use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    BadRow { line: u64, message: String },
    #[error("malformed TSV: {0}")]
    Tsv(#[from] csv::Error),
    #[error("embedding file, line {line}: {message}")]
    Embedding { line: u64, message: String },
    #[error("word2vec file: {0}")]
    Word2Vec(String),
    #[error("row {row}, column {column:?}: {message}")]
    MatrixCell {
        row: usize,
        column: String,
        message: String,
    },
    #[error("unknown feature name {0:?}")]
    UnknownFeature(String),
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True when the failure came from the filesystem rather than the data.
    pub fn is_io(&self) -> bool {
        match self {
            Error::Io { .. } => true,
            Error::Tsv(e) => e.is_io_error(),
            _ => false,
        }
    }
}
