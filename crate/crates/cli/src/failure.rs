use std::fmt;

use mbo_core::Error;

/// Why a command failed, mapped to the process exit code.
#[derive(Debug)]
pub enum Failure {
    /// Bad configuration or arguments (exit 2).
    Validation(String),
    /// The computation or file output failed (exit 3).
    Runtime(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Validation(_) => 2,
            Failure::Runtime(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Validation(m) => write!(f, "invalid configuration: {m}"),
            Failure::Runtime(m) => write!(f, "run failed: {m}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Geometry(_)
            | Error::Disconnected { .. }
            | Error::NonUniformDensity { .. }
            | Error::BackendUnavailable { .. }
            | Error::EntriesUnavailable(_)
            | Error::InvalidArgument(_)
            | Error::TargetTooSmall { .. }
            | Error::Format(_) => Failure::Validation(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}
