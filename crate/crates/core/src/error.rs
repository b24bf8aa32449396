use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(&'static str),
    #[error("bin index {index} out of range for a grid of {n_bins} bins")]
    BinOutOfRange { index: usize, n_bins: usize },
    #[error("length mismatch: expected {expected} entries, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("invalid sample response: {0}")]
    InvalidSample(String),
    #[error("invalid measurement configuration: {0}")]
    InvalidConfig(String),
    #[error("events are not time-sorted (first violation at index {0})")]
    UnsortedEvents(usize),
    #[error("delay scan does not capture the interference dip (maximum at scan boundary)")]
    DipNotCaptured,
    #[error("insufficient data: {0}")]
    Insufficient(String),
}
