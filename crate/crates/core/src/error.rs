use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("rate {rate_nats} nats is not below capacity {capacity_nats} nats; no positive bound exists")]
    RateAtOrAboveCapacity { rate_nats: f64, capacity_nats: f64 },

    #[error("grid of {cells} cells exceeds the cap of {cap}")]
    GridTooLarge { cells: usize, cap: usize },

    #[error("index ({relay}, {time}) outside the solved grid ({max_relay}, {max_time})")]
    OutOfGrid {
        relay: usize,
        time: i64,
        max_relay: usize,
        max_time: usize,
    },

    #[error("corrupted MSE grid: M_{{{next}}}({prev_time}) - M_{{{relay}}}({time}) = {diff:e} < 0")]
    CorruptedGrid {
        relay: usize,
        next: usize,
        time: usize,
        prev_time: i64,
        diff: f64,
    },

    #[error("non-finite state at node {relay}, time {time}: {what}")]
    NonFinite {
        relay: usize,
        time: usize,
        what: &'static str,
    },

    #[error("length mismatch: {what} (expected {expected}, got {got})")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("I/O error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
