use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// The model answered, but not in the expected section format.
    #[error("unparseable response: {reason}")]
    Parse { reason: String, raw: String },

    /// Retries were exhausted or the server replied with a non-retryable status.
    #[error("endpoint failed after {attempts} attempt(s): {message}")]
    Endpoint {
        attempts: u32,
        status: Option<u16>,
        message: String,
    },

    /// Generation stopped early; contexts written so far are intact.
    #[error("generation aborted after writing {written} context(s): {source}")]
    Aborted {
        written: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("malformed endpoint response: {0}")]
    Malformed(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("example pool: {0}")]
    Pool(String),

    #[error(transparent)]
    Core(#[from] gradrank_core::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the remote service rather than of local inputs.
    pub fn is_external(&self) -> bool {
        match self {
            Error::Endpoint { .. } | Error::Malformed(_) => true,
            Error::Aborted { source, .. } => source.is_external(),
            _ => false,
        }
    }

    pub(crate) fn parse(reason: impl Into<String>, raw: &str) -> Self {
        Error::Parse {
            reason: reason.into(),
            raw: raw.to_string(),
        }
    }
}
