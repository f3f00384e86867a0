//! Exit-code contract: 0 success, 1 check failure, 2 config error, 3 data or IO error.

use std::fmt;

pub const CHECK_FAILED: u8 = 1;
pub const CONFIG: u8 = 2;
pub const DATA: u8 = 3;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self {
            code: CONFIG,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self {
            code: DATA,
            message: message.into(),
        }
    }

    pub fn check_failed(message: impl Into<String>) -> Self {
        Self {
            code: CHECK_FAILED,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<osbp::Error> for CliError {
    fn from(err: osbp::Error) -> Self {
        use osbp::Error::*;
        let code = match err {
            Config(_) | Usage(_) => CONFIG,
            Shape { .. } | Validation(_) | Format { .. } | Io { .. } => DATA,
        };
        Self {
            code,
            message: err.to_string(),
        }
    }
}
