//! Library half of the `craft` binary: subcommand implementations and the
//! state server.

pub mod commands;
pub mod server;

use std::fmt;

use serde_json::{json, Value};

/// A failure with a process exit code and a stable kind tag.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub kind: &'static str,
    pub message: String,
    pub detail: Option<Value>,
}

impl CliError {
    pub fn new(code: i32, kind: &'static str, message: impl Into<String>) -> Self {
        CliError {
            code,
            kind,
            message: message.into(),
            detail: None,
        }
    }

    pub fn with_detail(mut self, detail: Value) -> Self {
        self.detail = Some(detail);
        self
    }

    /// Single-line JSON for stderr.
    pub fn to_line(&self) -> String {
        let mut v = json!({ "error": self.kind, "message": self.message, "code": self.code });
        if let Some(d) = &self.detail {
            v["detail"] = d.clone();
        }
        v.to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind, self.message)
    }
}

impl std::error::Error for CliError {}

impl From<craft_core::Error> for CliError {
    fn from(e: craft_core::Error) -> Self {
        CliError::new(1, "core", e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::new(1, "io", e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::new(1, "json", e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
