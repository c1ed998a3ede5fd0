use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("{0}")]
    Invalid(String),
    #[error("loss became {loss} in epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize, loss: f64 },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("network manifest: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Core(#[from] dupliq_core::Error),
}

impl Error {
    pub fn is_io(&self) -> bool {
        match self {
            Error::Io { .. } => true,
            Error::Core(e) => e.is_io(),
            _ => false,
        }
    }
}
