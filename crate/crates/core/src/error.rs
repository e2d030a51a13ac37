use thiserror::Error;

/// Errors raised by core containers and the sequence format.
#[derive(Debug, Error)]
pub enum CoreError {
    /// An invariant failed; the path names the offending field, e.g.
    /// `object.translation[17]`.
    #[error("invariant violation at `{path}`: {reason}")]
    Invariant { path: String, reason: String },

    /// Malformed sequence document.
    #[error("sequence format error: {0}")]
    Format(String),

    /// Track lengths disagree.
    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl CoreError {
    pub fn invariant(path: impl Into<String>, reason: impl Into<String>) -> Self {
        CoreError::Invariant {
            path: path.into(),
            reason: reason.into(),
        }
    }
}
