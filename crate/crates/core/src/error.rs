use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("structural error: {0}")]
    Structure(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("missing capability: {0}")]
    Capability(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("initialization error: {0}")]
    Init(String),
    #[error("node ({layer},{index}): {source}")]
    Node {
        layer: usize,
        index: usize,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn arg<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Argument(msg.into()))
}
