use thiserror::Error;

/// Error type shared across the crate.
#[derive(Debug, Error)]
pub enum QdiffError {
    /// Invalid parameters or configuration.
    #[error("config error: {0}")]
    Config(String),
    /// A computation was refused because it exceeds the desk-scale limits.
    #[error("resource limit: {0}")]
    ResourceLimit(String),
    /// A numerical check failed (e.g. a-posteriori truncation validation).
    #[error("check failed: {0}")]
    CheckFailed(String),
    /// Mismatched vector/matrix dimensions.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}
