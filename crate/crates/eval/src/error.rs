use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("degenerate point configuration: {0}")]
    Degenerate(String),

    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    #[error("empty model point set")]
    EmptyPoints,
}
