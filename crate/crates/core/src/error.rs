use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("singular operator: symbol magnitude {magnitude:e} at mode {mode} (max {max:e})")]
    SingularOperator { mode: usize, magnitude: f64, max: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("solver blow-up at step {step} (time {time}): |value| = {value:e}")]
    BlowUp { step: u64, time: f64, value: f64 },

    #[error("reality violation: max imaginary part {0:e}")]
    RealityViolation(f64),

    #[error("clock mismatch: {0}")]
    ClockMismatch(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("malformed data: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::BlowUp { .. } => 3,
            Error::ClockMismatch(_) | Error::GridMismatch(_) => 4,
            _ => 1,
        }
    }
}
