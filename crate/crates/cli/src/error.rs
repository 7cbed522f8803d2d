use std::fmt;

use chronoens::design::DesignFailure;

/// Exit status 1 for I/O failures, 2 for invalid input or infeasible designs.
#[derive(Debug)]
pub enum CliError {
    Io(String),
    Domain(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Domain(_) => 2,
        }
    }

    pub fn io(context: &str, e: std::io::Error) -> Self {
        CliError::Io(format!("{context}: {e}"))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Io(m) => write!(f, "I/O error: {m}"),
            CliError::Domain(m) => write!(f, "error: {m}"),
        }
    }
}

impl From<chronoens::Error> for CliError {
    fn from(e: chronoens::Error) -> Self {
        CliError::Domain(e.to_string())
    }
}

impl From<DesignFailure> for CliError {
    fn from(e: DesignFailure) -> Self {
        CliError::Domain(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        if e.is_io_error() {
            CliError::Io(e.to_string())
        } else {
            CliError::Domain(format!("malformed CSV: {e}"))
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
