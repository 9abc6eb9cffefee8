use std::path::PathBuf;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid configuration: {message}{}", location(.line))]
    Validation {
        message: String,
        line: Option<usize>,
    },
    #[error("computation failed: {0}")]
    Compute(#[from] edgespin::Error),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

fn location(line: &Option<usize>) -> String {
    line.map(|l| format!(" (line {l})")).unwrap_or_default()
}

pub type Result<T> = std::result::Result<T, CliError>;

/// One-line JSON error record printed on failure.
#[derive(Debug, Serialize)]
pub struct ErrorRecord {
    pub kind: &'static str,
    pub message: String,
    pub exit_code: i32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub line: Option<usize>,
}

impl CliError {
    pub fn validation(message: impl Into<String>) -> Self {
        Self::Validation {
            message: message.into(),
            line: None,
        }
    }

    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Self::Io {
            context: context.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Parse { .. } | Self::Validation { .. } => 1,
            Self::Compute(_) | Self::Io { .. } => 2,
        }
    }

    pub fn record(&self) -> ErrorRecord {
        let (kind, line) = match self {
            Self::Parse { line, .. } => ("parse", Some(*line)),
            Self::Validation { line, .. } => ("validation", *line),
            Self::Compute(_) => ("computation", None),
            Self::Io { .. } => ("io", None),
        };
        ErrorRecord {
            kind,
            message: self.to_string(),
            exit_code: self.exit_code(),
            line,
        }
    }
}
