use std::fmt::Display;

use serde_json::Value;

pub const EXIT_USAGE: u8 = 1;
pub const EXIT_DATA: u8 = 2;
pub const EXIT_RUNTIME: u8 = 3;

/// Successful command result: a human summary and its JSON equivalent.
pub struct Outcome {
    pub summary: String,
    pub json: Value,
}

/// A failed command with its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub error: anyhow::Error,
}

impl CliError {
    pub fn usage(msg: impl Display) -> Self {
        Self {
            code: EXIT_USAGE,
            error: anyhow::anyhow!("{msg}"),
        }
    }

    pub fn data(msg: impl Display) -> Self {
        Self {
            code: EXIT_DATA,
            error: anyhow::anyhow!("{msg}"),
        }
    }
}

pub type CmdResult = Result<Outcome, CliError>;

/// Attaches an exit code to any error.
pub trait Classify<T> {
    fn data(self) -> Result<T, CliError>;
    fn runtime(self) -> Result<T, CliError>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn data(self) -> Result<T, CliError> {
        self.map_err(|e| CliError {
            code: EXIT_DATA,
            error: e.into(),
        })
    }

    fn runtime(self) -> Result<T, CliError> {
        self.map_err(|e| CliError {
            code: EXIT_RUNTIME,
            error: e.into(),
        })
    }
}
