use crate::sequence::Token;

/// Errors raised by the edit-flow library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("anchor {pos} out of range for a sequence with {len} content tokens")]
    AnchorOutOfRange { pos: usize, len: usize },
    #[error("the BOS sentinel cannot be deleted or substituted")]
    ImmutableBos,
    #[error("sequence length {len} exceeds the configured maximum {max}")]
    TooLong { len: usize, max: usize },
    #[error("token {token} is not a content token of a vocabulary of size {size}")]
    InvalidToken { token: Token, size: usize },
    #[error("substitution at position {pos} does not change the token")]
    NoOpSubstitution { pos: usize },
    #[error("malformed aligned sequence: {0}")]
    MalformedAlignment(String),
    #[error("argument {value} outside [0, 1] in {what}")]
    OutOfUnitInterval { what: &'static str, value: f64 },
    #[error("state is not part of the enumerated space")]
    StateOutsideSpace,
    #[error("state space of size {size} exceeds the cap of {cap}")]
    SpaceTooLarge { size: usize, cap: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("training diverged at step {step}: {detail}")]
    Diverged { step: usize, detail: String },
    #[error("integration step too large: probability mass {mass} at t = {t}")]
    StepTooLarge { t: f64, mass: f64 },
    #[error("a reverse model is required when the corrector schedule is active")]
    MissingReverseModel,
    #[error("distribution has empty support")]
    EmptySupport,
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("trace: {0}")]
    Trace(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_unit(what: &'static str, value: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(Error::OutOfUnitInterval { what, value })
    }
}
