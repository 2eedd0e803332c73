use thiserror::Error;

/// Errors raised by the simulator and its front end.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("bit count {bits} is not a multiple of {bits_per_symbol} bits per symbol")]
    InvalidLength { bits: usize, bits_per_symbol: usize },

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("channel estimate magnitude is below the detection threshold")]
    DegenerateEstimate,

    #[error("pilot block has zero energy")]
    DegeneratePilots,

    #[error("antenna index {index} out of range 1..={count}")]
    IndexOutOfRange { index: usize, count: usize },

    #[error("every branch estimate is zero")]
    AllZeroEstimates,

    #[error("config error: {0}")]
    Config(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    /// Process exit code for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Io(_) => 3,
            _ => 4,
        }
    }
}
