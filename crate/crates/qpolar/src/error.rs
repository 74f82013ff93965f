use thiserror::Error;

/// Errors produced by channel construction, code construction, decoding and
/// file handling.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid channel: {0}")]
    InvalidChannel(String),

    #[error("symbol {symbol} out of range for alphabet of size {q}")]
    SymbolOutOfRange { symbol: usize, q: usize },

    #[error("output label {0:?} is not in the channel's output alphabet")]
    UnknownOutputLabel(String),

    #[error("output index {index} out of range ({outputs} outputs)")]
    OutputIndexOutOfRange { index: usize, outputs: usize },

    #[error("invalid probability vector: {0}")]
    InvalidDistribution(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("resource budget exceeded: estimated {estimated} bytes > budget {budget} bytes")]
    ResourceBudget { estimated: usize, budget: usize },

    #[error("construction fingerprint mismatch: expected {expected}, got {actual}")]
    FingerprintMismatch { expected: String, actual: String },

    #[error("wrong input length: expected {expected}, got {actual}")]
    WrongLength { expected: usize, actual: usize },

    #[error("length {0} is not a power of two")]
    NotPowerOfTwo(usize),

    #[error("likelihood vector has no mass (impossible evidence)")]
    ImpossibleEvidence,

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
