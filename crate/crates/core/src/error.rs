use alloc::string::String;

/// Errors raised by the core crate.
///
/// Contract violations (wrong dimensions, stale tapes, stepping a finished
/// episode) are reported as values rather than panics so that callers driving
/// long runs can abort cleanly with context.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("tape does not belong to the current parameters of this network")]
    StaleTape,
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("replay buffer not ready: holds {have} transitions, need {need}")]
    NotReady { have: usize, need: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("empty input to {0}")]
    Empty(&'static str),
    #[error("step called after the episode finished")]
    StepAfterDone,
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("malformed snapshot: {0}")]
    Decode(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
