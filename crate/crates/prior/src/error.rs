use thiserror::Error;

#[derive(Debug, Error)]
pub enum PriorError {
    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("decode error: {0}")]
    Decode(String),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("non-finite loss at step {step}: {value}")]
    NonFiniteLoss { step: u64, value: f64 },

    #[error("checkpoint format error: {0}")]
    Checkpoint(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}
