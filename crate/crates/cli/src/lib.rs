//! Library side of the harness binary: image I/O, parameter resolution and
//! the command implementations. The binary in `main.rs` is a thin clap
//! front-end over [`commands`].

pub mod commands;
pub mod pnm;

use thiserror::Error;

/// Command failures, split by exit code: bad input exits 2, a failed check
/// or diverged run exits 1.
#[derive(Debug, Error)]
pub enum CmdError {
    #[error("{0}")]
    BadInput(String),
    #[error("{0}")]
    CheckFailure(String),
}

impl From<hyperneck_core::Error> for CmdError {
    fn from(e: hyperneck_core::Error) -> Self {
        CmdError::BadInput(e.to_string())
    }
}

impl From<std::io::Error> for CmdError {
    fn from(e: std::io::Error) -> Self {
        CmdError::BadInput(format!("io error: {e}"))
    }
}

pub type CmdResult<T> = Result<T, CmdError>;

/// Exit code for a finished run.
pub fn exit_code(result: &CmdResult<()>) -> u8 {
    match result {
        Ok(()) => 0,
        Err(CmdError::CheckFailure(_)) => 1,
        Err(CmdError::BadInput(_)) => 2,
    }
}
