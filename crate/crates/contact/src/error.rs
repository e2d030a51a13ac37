use thiserror::Error;

#[derive(Debug, Error)]
pub enum ContactError {
    #[error("no candidate objects")]
    NoCandidates,

    /// Response text did not parse into the expected strict schema; the raw
    /// text is retained for the replay log.
    #[error("parse error: {reason} (raw: {raw:?})")]
    Parse { reason: String, raw: String },

    #[error("client error: {0}")]
    Client(#[from] ClientError),
}

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("transport: {0}")]
    Transport(String),

    #[error("missing replay entry for frame {frame} attempt {attempt}")]
    MissingReplay { frame: usize, attempt: usize },

    #[error("api key environment variable {0} not set")]
    MissingApiKey(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
