use std::fmt;

use pqc_core::Error as CoreError;
use serde_json::json;

/// Exit code for validation errors.
pub const EXIT_VALIDATION: i32 = 2;
/// Exit code for runtime failures.
pub const EXIT_RUNTIME: i32 = 1;
/// Exit code for an unknown or missing subcommand.
pub const EXIT_USAGE: i32 = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    Validation,
    Runtime,
}

#[derive(Debug)]
pub struct CliError {
    pub kind: Kind,
    pub message: String,
}

impl CliError {
    pub fn validation(message: impl Into<String>) -> Self {
        Self { kind: Kind::Validation, message: message.into() }
    }

    pub fn runtime(message: impl Into<String>) -> Self {
        Self { kind: Kind::Runtime, message: message.into() }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            Kind::Validation => EXIT_VALIDATION,
            Kind::Runtime => EXIT_RUNTIME,
        }
    }

    /// Machine-readable form written to standard error.
    pub fn to_json(&self) -> String {
        let kind = match self.kind {
            Kind::Validation => "validation",
            Kind::Runtime => "runtime",
        };
        json!({ "error": { "kind": kind, "message": self.message } }).to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        let message = e.to_string();
        match e {
            CoreError::QubitCount { .. }
            | CoreError::QubitIndex(_)
            | CoreError::Argument(_)
            | CoreError::Validation(_)
            | CoreError::SizeMismatch(_)
            | CoreError::Spec(_)
            | CoreError::Unsupported(_)
            | CoreError::UnsupportedGradient(_)
            | CoreError::NonAdjacent(..)
            | CoreError::Json(_) => CliError::validation(message),
            CoreError::Construction { .. }
            | CoreError::BondOverflow { .. }
            | CoreError::Diverged { .. }
            | CoreError::Invariant(_) => CliError::runtime(message),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::runtime(format!("I/O error: {e}"))
    }
}

pub type CliResult<T> = Result<T, CliError>;
